#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "bridle/codebook_training.hpp"
#include "bridle/error.hpp"
#include "bridle/quantizer.hpp"

namespace bridle {

// Desk-scale stand-in for real audio/image features: each frame is a coarse
// center plus a fine offset plus Gaussian noise. Each sequence has a dominant
// (coarse, fine) label pair that a frame keeps with probability
// `label_persistence`, so masked frames are predictable from context.
struct SyntheticDatasetSpec {
  std::size_t n_samples = 192;
  std::size_t seq_len = 32;       // T
  std::size_t feature_dim = 16;   // F
  std::size_t coarse_centers = 4;
  std::size_t fine_offsets = 4;
  double coarse_scale = 1.0;
  double fine_scale = 0.4;
  double noise_sigma = 0.05;
  double label_persistence = 0.75;
  std::uint64_t seed = 1;

  bool operator==(const SyntheticDatasetSpec&) const = default;
};

struct QuantizerConfig {
  std::size_t num_codebooks = 4;   // M
  std::size_t codebook_size = 16;  // K_m
  std::size_t dim = 8;             // D
  Normalization normalization = Normalization::input_only;
  int soft_k = 1;
  InitMode init_mode = InitMode::kmeans;
  int kmeans_steps = 10;
  double gamma = 0.99;
  double epsilon = 1e-5;
  double reset_threshold = 1.0;  // T_u

  QuantizerShape shape() const {
    return {std::vector<std::size_t>(num_codebooks, codebook_size), dim, normalization, soft_k};
  }

  bool operator==(const QuantizerConfig&) const = default;
};

struct LossWeights {
  double beta = 0.25;
  double lambda_cos = 1.0;
  double alpha = 0.5;

  bool operator==(const LossWeights&) const = default;
};

struct PhaseSchedule {
  int iterations = 2;
  int encoder_epochs = 30;
  int tokenizer_epochs = 10;
  std::size_t batch_size = 16;  // sequences per batch
  double mask_ratio = 0.8;
  double encoder_lr = 0.5;
  double tokenizer_lr = 0.1;
  bool joint_mode = false;
  int tokenizer_update_every = 5;  // 0: never update the tokenizer in joint mode

  bool operator==(const PhaseSchedule&) const = default;
};

struct RunConfig {
  std::string preset = "desk-rq";
  std::uint64_t seed = 1;
  std::size_t eval_samples = 64;
  SyntheticDatasetSpec dataset;
  QuantizerConfig quantizer;
  LossWeights losses;
  PhaseSchedule schedule;

  bool operator==(const RunConfig&) const = default;
};

// Named presets. The desk presets are the defaults used by tests; the full
// presets carry the large-scale codebook configuration.
inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk-rq") return c;
  if (name == "desk-vq") {
    c.quantizer.num_codebooks = 1;
    c.quantizer.codebook_size = 64;
    return c;
  }
  if (name == "full-rq" || name == "full-vq") {
    c.quantizer.num_codebooks = name == "full-rq" ? 4 : 1;
    c.quantizer.codebook_size = name == "full-rq" ? 256 : 1024;
    c.quantizer.dim = 256;
    c.dataset.feature_dim = 128;
    c.dataset.seq_len = 512;
    return c;
  }
  throw ValidationError("preset", "unknown preset '" + name + "'");
}

inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ValidationError(key, msg);
  };
  const auto& q = c.quantizer;
  const auto& s = c.schedule;
  const auto& d = c.dataset;
  require(q.gamma > 0.0 && q.gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(q.epsilon > 0.0 && std::isfinite(q.epsilon), "epsilon", "must be > 0");
  require(q.num_codebooks >= 1, "num_codebooks", "must be >= 1");
  require(q.codebook_size >= 2, "codebook_size", "must be >= 2");
  require(q.dim >= 1, "dim", "must be >= 1");
  require(q.soft_k >= 1 && static_cast<std::size_t>(q.soft_k) <= q.codebook_size, "soft_k",
          "must lie in [1, codebook_size]");
  require(q.kmeans_steps >= 0, "kmeans_steps", "must be >= 0");
  require(q.reset_threshold >= 0.0, "reset_threshold", "must be >= 0");
  require(c.losses.beta >= 0.0, "beta", "must be >= 0");
  require(c.losses.lambda_cos >= 0.0, "lambda_cos", "must be >= 0");
  require(c.losses.alpha >= 0.0, "alpha", "must be >= 0");
  require(s.mask_ratio > 0.0 && s.mask_ratio < 1.0, "mask_ratio", "must lie in (0, 1)");
  require(s.iterations >= 1, "iterations", "must be >= 1");
  require(s.encoder_epochs >= 0, "encoder_epochs", "must be >= 0");
  require(s.tokenizer_epochs >= 0, "tokenizer_epochs", "must be >= 0");
  require(s.batch_size >= 1, "batch_size", "must be >= 1");
  require(s.encoder_lr >= 0.0 && std::isfinite(s.encoder_lr), "encoder_lr", "must be >= 0");
  require(s.tokenizer_lr >= 0.0 && std::isfinite(s.tokenizer_lr), "tokenizer_lr",
          "must be >= 0");
  require(s.tokenizer_update_every >= 0, "tokenizer_update_every", "must be >= 0");
  require(d.n_samples >= 1, "n_samples", "must be >= 1");
  require(c.eval_samples >= 1, "eval_samples", "must be >= 1");
  require(d.seq_len >= 2, "seq_len", "must be >= 2");
  require(d.feature_dim >= 1, "feature_dim", "must be >= 1");
  require(d.coarse_centers >= 1, "coarse_centers", "must be >= 1");
  require(d.fine_offsets >= 1, "fine_offsets", "must be >= 1");
  require(d.noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
  require(d.coarse_scale >= 0.0, "coarse_scale", "must be >= 0");
  require(d.fine_scale >= 0.0, "fine_scale", "must be >= 0");
  require(d.label_persistence >= 0.0 && d.label_persistence <= 1.0, "label_persistence",
          "must lie in [0, 1]");
  require(std::min(s.batch_size, d.n_samples) * d.seq_len >= q.codebook_size, "batch_size",
          "first batch must hold at least codebook_size frames for k-means init");
}

}  // namespace bridle
