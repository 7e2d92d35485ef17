#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/matrix.hpp"
#include "bridle/quantizer.hpp"

namespace bridle {

inline constexpr double kProbabilityFloor = 1e-12;

struct TokenTargets {
  TokenGrid tokens;        // y_{t,m}
  std::vector<bool> mask;  // true: position contributes to the loss
};

// probs[m] is T x K_m, one distribution per position.
struct TokenPredictions {
  std::vector<Matrix> probs;
};

enum class CrossEntropyMode {
  masked,         // average over masked positions only
  all_positions,  // the literal sum over every t, normalized by T
};

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<Matrix> grad_logits;  // d loss / d pre-softmax logits, per stage
  std::size_t normalizer = 0;       // T' (or T)
  std::size_t floored = 0;          // target probabilities clamped to the floor
};

// Row-wise numerically stable softmax.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      o[k] = std::exp(in[k] - mx);
      z += o[k];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

inline CrossEntropyResult masked_cross_entropy(const TokenTargets& targets,
                                               const TokenPredictions& preds,
                                               CrossEntropyMode mode = CrossEntropyMode::masked) {
  const std::size_t T = targets.tokens.positions();
  const std::size_t M = targets.tokens.stages();
  BRIDLE_REQUIRE(preds.probs.size() == M, ErrorKind::invalid_input,
                 "prediction stage count does not match targets");
  BRIDLE_REQUIRE(mode == CrossEntropyMode::all_positions || targets.mask.size() == T,
                 ErrorKind::invalid_input, "mask length does not match targets");
  for (const auto& p : preds.probs)
    BRIDLE_REQUIRE(p.rows() == T, ErrorKind::invalid_input,
                   "prediction positions do not match targets");

  auto included = [&](std::size_t t) {
    return mode == CrossEntropyMode::all_positions || targets.mask[t];
  };
  CrossEntropyResult res;
  for (std::size_t t = 0; t < T; ++t) res.normalizer += included(t) ? 1 : 0;
  if (res.normalizer == 0) throw Error(ErrorKind::degenerate, "cross-entropy over an empty mask");
  const double inv = 1.0 / static_cast<double>(res.normalizer);

  for (std::size_t m = 0; m < M; ++m) {
    const Matrix& p = preds.probs[m];
    Matrix g(T, p.cols());
    for (std::size_t t = 0; t < T; ++t) {
      if (!included(t)) continue;
      const int y = targets.tokens(t, m);
      BRIDLE_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < p.cols(),
                     ErrorKind::invalid_input, "target token out of range");
      double py = p(t, static_cast<std::size_t>(y));
      if (py < kProbabilityFloor) {
        py = kProbabilityFloor;
        ++res.floored;
      }
      res.loss -= std::log(py);
      for (std::size_t k = 0; k < p.cols(); ++k) g(t, k) = p(t, k) * inv;
      g(t, static_cast<std::size_t>(y)) -= inv;
    }
    res.grad_logits.push_back(std::move(g));
  }
  res.loss *= inv;
  return res;
}

struct CodebookLossResult {
  double loss = 0.0;
  Matrix dZ;  // from the commitment term only
  Matrix dQ;  // from the codebook term only
};

// (1/T) sum_t |sg[z] - q|^2 + beta |z - sg[q]|^2
inline CodebookLossResult codebook_loss(const Matrix& Z, const Matrix& Q, double beta) {
  BRIDLE_REQUIRE(Z.rows() == Q.rows() && Z.cols() == Q.cols(), ErrorKind::invalid_input,
                 "codebook loss shape mismatch");
  BRIDLE_REQUIRE(beta >= 0.0, ErrorKind::invalid_input, "beta must be >= 0");
  BRIDLE_REQUIRE(Z.rows() >= 1, ErrorKind::invalid_input, "codebook loss over no positions");
  const double T = static_cast<double>(Z.rows());
  CodebookLossResult res{0.0, Matrix(Z.rows(), Z.cols()), Matrix(Z.rows(), Z.cols())};
  for (std::size_t t = 0; t < Z.rows(); ++t) {
    const double d2 = squared_distance(Z.row(t), Q.row(t));
    res.loss += d2 + beta * d2;
    for (std::size_t d = 0; d < Z.cols(); ++d) {
      const double diff = Z(t, d) - Q(t, d);
      res.dZ(t, d) = 2.0 * beta * diff / T;
      res.dQ(t, d) = -2.0 * diff / T;
    }
  }
  res.loss /= T;
  return res;
}

struct CosineLossResult {
  double loss = 0.0;
  Matrix d_estimates;
};

// 1 - (sum_t est_t . z_t) / (sum_t |est_t| |z_t|): a single ratio of sums.
inline CosineLossResult cosine_alignment_loss(const Matrix& estimates, const Matrix& Z) {
  BRIDLE_REQUIRE(estimates.rows() == Z.rows() && estimates.cols() == Z.cols(),
                 ErrorKind::invalid_input, "cosine loss shape mismatch");
  BRIDLE_REQUIRE(Z.rows() >= 1, ErrorKind::invalid_input, "cosine loss over no positions");
  const std::size_t T = Z.rows();
  Vector est_norm(T), z_norm(T);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    est_norm[t] = norm(estimates.row(t));
    z_norm[t] = norm(Z.row(t));
    if (est_norm[t] == 0.0 || z_norm[t] == 0.0)
      throw Error(ErrorKind::degenerate,
                  "cosine loss undefined for zero-norm vector at position " + std::to_string(t));
    num += dot(estimates.row(t), Z.row(t));
    den += est_norm[t] * z_norm[t];
  }
  CosineLossResult res{1.0 - num / den, Matrix(T, Z.cols())};
  // d/de_t [-(N/Dn)] = -(z_t / Dn) + (N / Dn^2) |z_t| e_t / |e_t|
  for (std::size_t t = 0; t < T; ++t) {
    const double scale = num / (den * den) * z_norm[t] / est_norm[t];
    for (std::size_t d = 0; d < Z.cols(); ++d)
      res.d_estimates(t, d) = -Z(t, d) / den + scale * estimates(t, d);
  }
  return res;
}

inline double tokenizer_loss(double cb_loss, double cos_loss, double lambda_cos) {
  BRIDLE_REQUIRE(lambda_cos >= 0.0, ErrorKind::invalid_input, "lambda_cos must be >= 0");
  return cb_loss + lambda_cos * cos_loss;
}

inline double joint_loss(double encoder_loss, double tok_loss, double alpha) {
  BRIDLE_REQUIRE(alpha >= 0.0, ErrorKind::invalid_input, "alpha must be >= 0");
  return encoder_loss + alpha * tok_loss;
}

// Straight-through estimator: forward emits q, backward routes the
// downstream gradient to z untouched and nothing to q.
struct StraightThrough {
  static Vector forward(std::span<const double> z, std::span<const double> q) {
    BRIDLE_REQUIRE(z.size() == q.size(), ErrorKind::invalid_input,
                   "straight-through shape mismatch");
    return {q.begin(), q.end()};
  }

  struct Grad {
    Vector dz;
    Vector dq;
  };

  static Grad backward(std::span<const double> g) {
    return {Vector(g.begin(), g.end()), Vector(g.size(), 0.0)};
  }
};

struct LossReport {
  double encoder_loss = 0.0;
  double cb_loss = 0.0;
  double cos_loss = 0.0;
  double tokenizer_loss = 0.0;
  double joint_loss = 0.0;
  double beta = 0.25;
  double lambda_cos = 1.0;
  double alpha = 0.5;

  static LossReport make(double enc, double cb, double cos, double beta, double lambda_cos,
                         double alpha) {
    LossReport r;
    r.encoder_loss = enc;
    r.cb_loss = cb;
    r.cos_loss = cos;
    r.beta = beta;
    r.lambda_cos = lambda_cos;
    r.alpha = alpha;
    r.tokenizer_loss = bridle::tokenizer_loss(cb, cos, lambda_cos);
    r.joint_loss = bridle::joint_loss(enc, r.tokenizer_loss, alpha);
    return r;
  }
};

}  // namespace bridle
