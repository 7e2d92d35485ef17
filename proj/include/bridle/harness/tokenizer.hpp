#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bridle/codebook_training.hpp"
#include "bridle/config.hpp"
#include "bridle/error.hpp"
#include "bridle/harness/models.hpp"
#include "bridle/losses.hpp"
#include "bridle/quantizer.hpp"

namespace bridle {

// Tokenizer encoder + codebooks (+ their EMA state) + estimator.
struct Tokenizer {
  ToyTokenizerEncoder encoder;
  ToyEstimator estimator;
  std::optional<ResidualQuantizer> quantizer;  // empty until the first batch is seen
  std::vector<EmaState> ema;                   // one per stage, once training starts
  double gamma = 0.99;
  double epsilon = 1e-5;

  bool initialized() const noexcept { return quantizer.has_value(); }

  const ResidualQuantizer& rq() const {
    BRIDLE_REQUIRE(quantizer.has_value(), ErrorKind::invalid_input,
                   "tokenizer codebooks are not initialized");
    return *quantizer;
  }
};

inline Tokenizer fresh_tokenizer(const QuantizerConfig& qc, std::size_t feature_dim,
                                 std::uint64_t seed, bool cold_start) {
  Tokenizer tok;
  tok.encoder.map = AffineMap::random(qc.dim, feature_dim,
                                      1.0 / std::sqrt(static_cast<double>(feature_dim)),
                                      derive_seed(seed, 1));
  tok.encoder.cold_start = cold_start;
  tok.estimator.map =
      AffineMap::random(qc.dim, qc.dim, 1.0 / std::sqrt(static_cast<double>(qc.dim)),
                        derive_seed(seed, 2));
  return tok;
}

inline Matrix tokenizer_latents(const Tokenizer& tok, const Matrix& x) {
  return affine_forward(tok.encoder.map, x);
}

// Fits the codebooks to the tokenizer-encoder latents of `frames`. EMA
// accumulators are created by the first EMA update.
inline void initialize_codebooks(Tokenizer& tok, const Matrix& frames, const QuantizerConfig& qc,
                                 std::uint64_t seed) {
  const Matrix latents = tokenizer_latents(tok, frames);
  tok.quantizer = fit_rq_init(latents, qc.shape(), qc.init_mode, seed, qc.kmeans_steps);
  tok.ema.clear();
  tok.gamma = qc.gamma;
  tok.epsilon = qc.epsilon;
}

struct TokenizerOutput {
  Matrix latents;  // u = tokenizer encoder output
  QuantizationResult quant;
};

inline TokenizerOutput tokenize(const Tokenizer& tok, const Matrix& x) {
  TokenizerOutput out;
  out.latents = tokenizer_latents(tok, x);
  out.quant = quantize(out.latents, tok.rq());
  return out;
}

struct TokenizerGrad {
  ToyTokenizerEncoder encoder;
  ToyEstimator estimator;

  static TokenizerGrad zeros(const Tokenizer& tok) {
    return {zeros_like(tok.encoder), zeros_like(tok.estimator)};
  }
};

struct TokenizerLossParts {
  double cb = 0.0;
  double cos = 0.0;
};

// L_tok = L_cb(e_1, q) + lambda * L_cos(TE(q), z) for one sequence. The
// teacher z is treated as a constant. Gradients (times `scale`) reach the
// estimator directly and the tokenizer encoder through the straight-through
// path q -> e_1 and the input normalization.
inline TokenizerLossParts tokenizer_loss_and_grad(const Tokenizer& tok, const Matrix& x,
                                                  const TokenizerOutput& out,
                                                  const Matrix& teacher, const LossWeights& w,
                                                  double scale, TokenizerGrad& grad) {
  const Matrix& e1 = out.quant.residuals.front();
  const Matrix& q = out.quant.quantized;

  const Matrix est = affine_forward(tok.estimator.map, q);
  CosineLossResult cos = cosine_alignment_loss(est, teacher);
  CodebookLossResult cb = codebook_loss(e1, q, w.beta);

  for (double& v : cos.d_estimates.flat()) v *= scale * w.lambda_cos;
  const Matrix dq = affine_backward(tok.estimator.map, q, cos.d_estimates, grad.estimator.map);

  Matrix de1 = dq;  // straight-through
  axpy(scale, cb.dZ.flat(), de1.flat());

  Matrix du = de1;
  if (tok.rq().normalization() != Normalization::none) {
    for (std::size_t t = 0; t < du.rows(); ++t) {
      const double n = norm(out.latents.row(t));
      if (n == 0.0) continue;
      const double proj = dot(e1.row(t), de1.row(t));
      for (std::size_t d = 0; d < du.cols(); ++d)
        du(t, d) = (de1(t, d) - e1(t, d) * proj) / n;
    }
  }
  affine_backward(tok.encoder.map, x, du, grad.encoder.map);
  return {cb.loss, cos.loss};
}

// One EMA update per stage from a batch of quantization results. The first
// update warm-starts the accumulators from that batch's code usage.
inline void tokenizer_ema_update(Tokenizer& tok, const std::vector<const QuantizationResult*>& batch) {
  ResidualQuantizer& rq = *tok.quantizer;
  const bool first = tok.ema.empty();
  for (std::size_t m = 0; m < rq.num_stages(); ++m) {
    BatchAssignment ba;
    for (const auto* res : batch) {
      for (std::size_t t = 0; t < res->tokens.positions(); ++t) {
        ba.latents.append_row(res->residuals[m].row(t));
        ba.codes.push_back(res->tokens(t, m));
      }
    }
    if (first) {
      Vector usage(rq.stage(m).size(), 0.0);
      for (int c : ba.codes) usage[static_cast<std::size_t>(c)] += 1.0;
      tok.ema.push_back(EmaState::warm_start(rq.stage(m), usage, tok.gamma, tok.epsilon));
    }
    EmaUpdate up = ema_step(tok.ema[m], rq.stage(m), ba);
    tok.ema[m] = std::move(up.state);
    rq.stage(m) = std::move(up.codebook);
  }
}

// Byte snapshot of every tokenizer weight, code vector and EMA accumulator.
inline std::vector<unsigned char> tokenizer_bytes(const Tokenizer& tok) {
  std::vector<unsigned char> out = parameter_bytes(tok.encoder);
  const auto est = parameter_bytes(tok.estimator);
  out.insert(out.end(), est.begin(), est.end());
  auto append = [&out](std::span<const double> v) {
    const auto* raw = reinterpret_cast<const unsigned char*>(v.data());
    out.insert(out.end(), raw, raw + v.size_bytes());
  };
  if (tok.quantizer)
    for (const auto& cb : tok.quantizer->stages()) append(cb.vectors.flat());
  for (const auto& e : tok.ema) {
    append(e.counts);
    append(e.smoothed);
    append(e.embed_sum.flat());
  }
  return out;
}

}  // namespace bridle
