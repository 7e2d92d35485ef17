#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/matrix.hpp"
#include "bridle/random.hpp"

// Tiny models with hand-derived gradients. Every model exposes its weights
// as a list of flat spans so that optimizers, gradient checks and byte
// snapshots can treat all of them alike. A zeroed copy of a model doubles
// as its gradient accumulator.

namespace bridle {

namespace detail {

inline void fill_normal(std::span<double> values, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : values) v = dist(rng);
}

}  // namespace detail

// z_t = W_local x~_t + W_ctx mean_s(x~_s) + bias, where x~ swaps masked
// frames for the learned mask vector.
struct ToyEncoder {
  Matrix w_local;  // D x F
  Matrix w_ctx;    // D x F
  Vector bias;     // D
  Vector mask_vector;  // F

  static ToyEncoder random(std::size_t D, std::size_t F, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x656e63);
    ToyEncoder e{Matrix(D, F), Matrix(D, F), Vector(D, 0.0), Vector(F, 0.0)};
    const double s = 1.0 / std::sqrt(static_cast<double>(F));
    detail::fill_normal(e.w_local.flat(), s, rng);
    detail::fill_normal(e.w_ctx.flat(), s, rng);
    return e;
  }

  std::size_t latent_dim() const { return w_local.rows(); }
  std::size_t feature_dim() const { return w_local.cols(); }

  std::vector<std::span<double>> parameters() {
    return {w_local.flat(), w_ctx.flat(), bias, mask_vector};
  }
  std::vector<std::span<const double>> parameters() const {
    return {w_local.flat(), w_ctx.flat(), bias, mask_vector};
  }
};

struct EncoderCache {
  Matrix x_tilde;
  Vector context;  // mean over positions of x~
  std::vector<bool> mask;
};

inline Matrix encoder_forward(const ToyEncoder& enc, const Matrix& x,
                              const std::vector<bool>& mask, EncoderCache* cache = nullptr) {
  const std::size_t T = x.rows();
  const std::size_t F = enc.feature_dim();
  const std::size_t D = enc.latent_dim();
  BRIDLE_REQUIRE(x.cols() == F, ErrorKind::invalid_input, "encoder input width mismatch");
  BRIDLE_REQUIRE(mask.empty() || mask.size() == T, ErrorKind::invalid_input,
                 "mask length mismatch");
  Matrix xt = x;
  for (std::size_t t = 0; t < T; ++t)
    if (!mask.empty() && mask[t])
      std::copy(enc.mask_vector.begin(), enc.mask_vector.end(), xt.row(t).begin());
  Vector ctx(F, 0.0);
  for (std::size_t t = 0; t < T; ++t) axpy(1.0 / static_cast<double>(T), xt.row(t), ctx);

  Vector shared(D);
  matvec(enc.w_ctx, ctx, shared);
  axpy(1.0, enc.bias, shared);
  Matrix z(T, D);
  for (std::size_t t = 0; t < T; ++t) {
    matvec(enc.w_local, xt.row(t), z.row(t));
    axpy(1.0, shared, z.row(t));
  }
  if (cache) *cache = {std::move(xt), std::move(ctx), mask};
  return z;
}

// Accumulates d loss / d params into `grad` given dz = d loss / d z.
inline void encoder_backward(const ToyEncoder& enc, const EncoderCache& cache, const Matrix& dz,
                             ToyEncoder& grad) {
  const std::size_t T = dz.rows();
  const std::size_t F = enc.feature_dim();
  Vector dz_sum(enc.latent_dim(), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    outer_add(1.0, dz.row(t), cache.x_tilde.row(t), grad.w_local);
    axpy(1.0, dz.row(t), dz_sum);
  }
  outer_add(1.0, dz_sum, cache.context, grad.w_ctx);
  axpy(1.0, dz_sum, grad.bias);

  // d/dx~_t = W_local^T dz_t + (1/T) W_ctx^T sum_s dz_s; masked rows feed the mask vector.
  Vector ctx_grad(F, 0.0);
  matvec_transposed_add(enc.w_ctx, dz_sum, ctx_grad);
  for (std::size_t t = 0; t < T; ++t) {
    if (cache.mask.empty() || !cache.mask[t]) continue;
    matvec_transposed_add(enc.w_local, dz.row(t), grad.mask_vector);
    axpy(1.0 / static_cast<double>(T), ctx_grad, grad.mask_vector);
  }
}

// One affine classifier head per quantizer stage.
struct ToyDecoder {
  std::vector<Matrix> heads;   // K_m x D
  std::vector<Vector> biases;  // K_m

  static ToyDecoder random(std::span<const std::size_t> codebook_sizes, std::size_t D,
                           std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x646563);
    ToyDecoder d;
    for (std::size_t k : codebook_sizes) {
      d.heads.emplace_back(k, D);
      detail::fill_normal(d.heads.back().flat(), 0.1 / std::sqrt(static_cast<double>(D)), rng);
      d.biases.emplace_back(k, 0.0);
    }
    return d;
  }

  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> p;
    for (std::size_t m = 0; m < heads.size(); ++m) {
      p.push_back(heads[m].flat());
      p.push_back(biases[m]);
    }
    return p;
  }
  std::vector<std::span<const double>> parameters() const {
    std::vector<std::span<const double>> p;
    for (std::size_t m = 0; m < heads.size(); ++m) {
      p.push_back(heads[m].flat());
      p.push_back(biases[m]);
    }
    return p;
  }
};

inline std::vector<Matrix> decoder_forward(const ToyDecoder& dec, const Matrix& z) {
  std::vector<Matrix> logits;
  for (std::size_t m = 0; m < dec.heads.size(); ++m) {
    Matrix l(z.rows(), dec.heads[m].rows());
    for (std::size_t t = 0; t < z.rows(); ++t) {
      matvec(dec.heads[m], z.row(t), l.row(t));
      axpy(1.0, dec.biases[m], l.row(t));
    }
    logits.push_back(std::move(l));
  }
  return logits;
}

// Accumulates head gradients into `grad` and returns d loss / d z.
inline Matrix decoder_backward(const ToyDecoder& dec, const Matrix& z,
                               const std::vector<Matrix>& grad_logits, ToyDecoder& grad) {
  Matrix dz(z.rows(), z.cols());
  for (std::size_t m = 0; m < dec.heads.size(); ++m) {
    for (std::size_t t = 0; t < z.rows(); ++t) {
      const auto g = grad_logits[m].row(t);
      outer_add(1.0, g, z.row(t), grad.heads[m]);
      axpy(1.0, g, grad.biases[m]);
      matvec_transposed_add(dec.heads[m], g, dz.row(t));
    }
  }
  return dz;
}

// Affine map used twice: the tokenizer encoder (F -> D) and the tokenizer
// estimator (D -> D).
struct AffineMap {
  Matrix weight;  // out x in
  Vector bias;    // out

  static AffineMap random(std::size_t out, std::size_t in, double stddev, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x6166);
    AffineMap a{Matrix(out, in), Vector(out, 0.0)};
    detail::fill_normal(a.weight.flat(), stddev, rng);
    return a;
  }

  std::vector<std::span<double>> parameters() { return {weight.flat(), bias}; }
  std::vector<std::span<const double>> parameters() const { return {weight.flat(), bias}; }
};

inline Matrix affine_forward(const AffineMap& a, const Matrix& x) {
  BRIDLE_REQUIRE(x.cols() == a.weight.cols(), ErrorKind::invalid_input,
                 "affine input width mismatch");
  Matrix y(x.rows(), a.weight.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    matvec(a.weight, x.row(t), y.row(t));
    axpy(1.0, a.bias, y.row(t));
  }
  return y;
}

// Accumulates into `grad`; returns d loss / d x.
inline Matrix affine_backward(const AffineMap& a, const Matrix& x, const Matrix& dy,
                              AffineMap& grad) {
  Matrix dx(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    outer_add(1.0, dy.row(t), x.row(t), grad.weight);
    axpy(1.0, dy.row(t), grad.bias);
    matvec_transposed_add(a.weight, dy.row(t), dx.row(t));
  }
  return dx;
}

struct ToyTokenizerEncoder {
  AffineMap map;  // F -> D
  bool cold_start = false;  // frozen random projection

  std::vector<std::span<double>> parameters() { return map.parameters(); }
  std::vector<std::span<const double>> parameters() const { return map.parameters(); }
};

struct ToyEstimator {
  AffineMap map;  // D -> D

  std::vector<std::span<double>> parameters() { return map.parameters(); }
  std::vector<std::span<const double>> parameters() const { return map.parameters(); }
};

// ---------------------------------------------------------------------------
// Generic helpers over parameter lists

template <class Model>
Model zeros_like(const Model& model) {
  Model z = model;
  for (auto p : z.parameters()) std::fill(p.begin(), p.end(), 0.0);
  return z;
}

template <class Model>
void scale_parameters(Model& model, double factor) {
  for (auto p : model.parameters())
    for (double& v : p) v *= factor;
}

// params -= lr * grad
template <class Model>
void sgd_step(Model& model, const Model& grad, double lr) {
  auto params = model.parameters();
  const auto grads = grad.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) axpy(-lr, grads[i], params[i]);
}

template <class Model>
bool parameters_finite(const Model& model) {
  for (auto p : model.parameters())
    if (!all_finite(p)) return false;
  return true;
}

template <class Model>
std::vector<unsigned char> parameter_bytes(const Model& model) {
  std::vector<unsigned char> out;
  for (auto p : model.parameters()) {
    const auto* raw = reinterpret_cast<const unsigned char*>(p.data());
    out.insert(out.end(), raw, raw + p.size_bytes());
  }
  return out;
}

}  // namespace bridle
