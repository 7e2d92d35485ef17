#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bridle/codebook_training.hpp"
#include "bridle/config.hpp"
#include "bridle/error.hpp"
#include "bridle/harness/data.hpp"
#include "bridle/harness/models.hpp"
#include "bridle/harness/tokenizer.hpp"
#include "bridle/losses.hpp"
#include "bridle/metrics.hpp"
#include "bridle/random.hpp"

namespace bridle {

enum class PhaseKind { encoder, tokenizer, joint };

inline const char* to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::encoder: return "encoder";
    case PhaseKind::tokenizer: return "tokenizer";
    case PhaseKind::joint: return "joint";
  }
  return "encoder";
}

struct EpochLog {
  int epoch = 0;
  LossReport losses;
  std::size_t tokenizer_updates = 0;
};

struct Evaluation {
  int iteration = 0;
  double accuracy = 0.0;  // masked-token accuracy over all stages
  Vector stage_accuracy;
  double mse = 0.0;       // mean |e_1 - q|^2
  MetricsReport metrics;
};

struct PhaseLog {
  PhaseKind kind = PhaseKind::encoder;
  int iteration = 0;
  std::vector<EpochLog> epochs;
  std::size_t codes_reset = 0;
  std::optional<MetricsReport> pre_metrics;
  std::optional<MetricsReport> post_metrics;
};

struct RunReport {
  RunConfig config;
  std::vector<PhaseLog> phases;
  std::vector<Evaluation> evaluations;  // one per encoder phase (or joint iteration)
  double chance = 0.0;
  double final_accuracy = 0.0;
};

struct RunResult {
  RunReport report;
  ToyEncoder encoder;
  ToyDecoder decoder;
  Tokenizer tokenizer;
};

namespace detail {

// Seed tags; keep stable, reports depend on them.
enum : std::uint64_t {
  kTagEncoder = 11,
  kTagDecoder = 12,
  kTagTokenizer = 13,
  kTagCodebookInit = 14,
  kTagShuffle = 15,
  kTagMask = 16,
  kTagEvalMask = 17,
  kTagReset = 18,
  kTagData = 19,
};

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(derive_seed(seed, kTagShuffle), static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& order,
                                                     std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  return out;
}

inline Matrix stack_frames(const Dataset& ds, std::span<const std::size_t> idx) {
  Matrix out;
  for (std::size_t i : idx)
    for (std::size_t t = 0; t < ds.sequences[i].rows(); ++t) out.append_row(ds.sequences[i].row(t));
  return out;
}

inline void guard_finite(double value, const char* what) {
  if (!std::isfinite(value))
    throw Error(ErrorKind::divergence, std::string(what) + " became non-finite");
}

inline TokenTargets targets_from(const TokenGrid& tokens, std::vector<bool> mask) {
  return {tokens, std::move(mask)};
}

// Masked cross-entropy for one sequence; accumulates scaled grads.
inline double encoder_step_sequence(const ToyEncoder& enc, const ToyDecoder& dec,
                                    const Matrix& x, const TokenGrid& tokens,
                                    const std::vector<bool>& mask, double scale,
                                    ToyEncoder& genc, ToyDecoder& gdec) {
  EncoderCache cache;
  const Matrix z = encoder_forward(enc, x, mask, &cache);
  const auto logits = decoder_forward(dec, z);
  TokenPredictions preds;
  for (const auto& l : logits) preds.probs.push_back(softmax_rows(l));
  CrossEntropyResult ce = masked_cross_entropy(targets_from(tokens, mask), preds);
  for (auto& g : ce.grad_logits)
    for (double& v : g.flat()) v *= scale;
  const Matrix dz = decoder_backward(dec, z, ce.grad_logits, gdec);
  encoder_backward(enc, cache, dz, genc);
  return ce.loss;
}

}  // namespace detail

inline Evaluation evaluate(const Dataset& eval, const ToyEncoder& enc, const ToyDecoder& dec,
                           const Tokenizer& tok, const RunConfig& cfg, int iteration) {
  const std::size_t M = tok.rq().num_stages();
  Evaluation ev;
  ev.iteration = iteration;
  ev.stage_accuracy.assign(M, 0.0);
  TokenGrid all;
  double sq = 0.0;
  std::size_t frames = 0;
  std::size_t masked = 0;
  const std::uint64_t mask_seed = derive_seed(cfg.seed, detail::kTagEvalMask);
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const Matrix& x = eval.sequences[i];
    const TokenizerOutput out = tokenize(tok, x);
    all.append(out.quant.tokens);
    for (std::size_t t = 0; t < x.rows(); ++t) sq += squared_norm(out.quant.residuals.back().row(t));
    frames += x.rows();

    const auto mask = sample_mask(x.rows(), cfg.schedule.mask_ratio, derive_seed(mask_seed, i));
    const auto logits = decoder_forward(dec, encoder_forward(enc, x, mask));
    for (std::size_t t = 0; t < x.rows(); ++t) {
      if (!mask[t]) continue;
      ++masked;
      for (std::size_t m = 0; m < M; ++m) {
        const auto row = logits[m].row(t);
        const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
        if (pred == out.quant.tokens(t, m)) ev.stage_accuracy[m] += 1.0;
      }
    }
  }
  double total = 0.0;
  for (double& a : ev.stage_accuracy) {
    a /= static_cast<double>(masked);
    total += a;
  }
  ev.accuracy = total / static_cast<double>(M);
  ev.mse = sq / static_cast<double>(frames);
  ev.metrics = metrics_report(all, tok.rq(), Provenance::post_training);
  return ev;
}

// Masked-token training of encoder + decoder against a frozen tokenizer.
// Targets come from the unmasked input.
inline PhaseLog train_encoder_phase(const Dataset& train, const Tokenizer& tok, ToyEncoder& enc,
                                    ToyDecoder& dec, const RunConfig& cfg, std::uint64_t seed,
                                    int iteration) {
  PhaseLog log;
  log.kind = PhaseKind::encoder;
  log.iteration = iteration;
  std::vector<TokenGrid> targets;
  targets.reserve(train.size());
  for (const auto& x : train.sequences) targets.push_back(tokenize(tok, x).quant.tokens);

  const auto& s = cfg.schedule;
  const std::uint64_t mask_seed = derive_seed(seed, detail::kTagMask);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < s.encoder_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch : detail::batches(detail::epoch_order(train.size(), seed, epoch),
                                             s.batch_size)) {
      ToyEncoder genc = zeros_like(enc);
      ToyDecoder gdec = zeros_like(dec);
      const double scale = 1.0 / static_cast<double>(batch.size());
      double loss = 0.0;
      for (std::size_t i : batch) {
        const auto mask = sample_mask(train.sequences[i].rows(), s.mask_ratio,
                                      derive_seed(mask_seed, step * 1000003ULL + i));
        loss += scale * detail::encoder_step_sequence(enc, dec, train.sequences[i], targets[i],
                                                      mask, scale, genc, gdec);
      }
      ++step;
      detail::guard_finite(loss, "encoder loss");
      sgd_step(enc, genc, s.encoder_lr);
      sgd_step(dec, gdec, s.encoder_lr);
      loss_sum += loss;
      ++n_batches;
    }
    EpochLog e;
    e.epoch = epoch;
    e.losses = LossReport::make(loss_sum / static_cast<double>(n_batches), 0.0, 0.0,
                                cfg.losses.beta, cfg.losses.lambda_cos, cfg.losses.alpha);
    log.epochs.push_back(e);
  }
  return log;
}

namespace detail {

struct TokenizerBatchResult {
  double cb = 0.0;
  double cos = 0.0;
  std::size_t codes_reset = 0;
};

// One tokenizer update on a batch: quantize, optional first-batch reset,
// loss/gradients (scaled by `weight`), gradient step, EMA step.
inline TokenizerBatchResult tokenizer_batch(const Dataset& train, std::span<const std::size_t> batch,
                                            const ToyEncoder& teacher_enc, Tokenizer& tok,
                                            const RunConfig& cfg, double weight, double lr,
                                            bool reset_codes, std::uint64_t reset_seed) {
  TokenizerBatchResult r;
  std::vector<TokenizerOutput> outs;
  for (std::size_t i : batch) outs.push_back(tokenize(tok, train.sequences[i]));

  if (reset_codes) {
    ResidualQuantizer& rq = *tok.quantizer;
    for (std::size_t m = 0; m < rq.num_stages(); ++m) {
      Vector counts(rq.stage(m).size(), 0.0);
      Matrix latents;
      for (const auto& o : outs) {
        for (std::size_t t = 0; t < o.quant.tokens.positions(); ++t) {
          counts[static_cast<std::size_t>(o.quant.tokens(t, m))] += 1.0;
          latents.append_row(o.quant.residuals[m].row(t));
        }
      }
      ResetResult rr = reset_unused(rq.stage(m), counts, latents, cfg.quantizer.reset_threshold,
                                    derive_seed(reset_seed, m));
      if (rr.num_reset() == 0) continue;
      r.codes_reset += rr.num_reset();
      rq.stage(m) = std::move(rr.codebook);
      if (m < tok.ema.size()) reset_ema_entries(tok.ema[m], rq.stage(m), rr.mask);
      // later stages see different residuals once an earlier stage changes
      for (std::size_t k = 0; k < batch.size(); ++k) outs[k] = tokenize(tok, train.sequences[batch[k]]);
    }
  }

  TokenizerGrad grad = TokenizerGrad::zeros(tok);
  const double scale = weight / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Matrix& x = train.sequences[batch[k]];
    const Matrix teacher = encoder_forward(teacher_enc, x, {});
    const TokenizerLossParts parts =
        tokenizer_loss_and_grad(tok, x, outs[k], teacher, cfg.losses, scale, grad);
    r.cb += parts.cb / static_cast<double>(batch.size());
    r.cos += parts.cos / static_cast<double>(batch.size());
  }
  guard_finite(r.cb, "codebook loss");
  guard_finite(r.cos, "cosine loss");
  if (!tok.encoder.cold_start) sgd_step(tok.encoder, grad.encoder, lr);
  sgd_step(tok.estimator, grad.estimator, lr);

  std::vector<const QuantizationResult*> qs;
  for (const auto& o : outs) qs.push_back(&o.quant);
  tokenizer_ema_update(tok, qs);
  return r;
}

inline MetricsReport tokenizer_metrics(const Dataset& ds, const Tokenizer& tok, Provenance p) {
  TokenGrid all;
  for (const auto& x : ds.sequences) all.append(tokenize(tok, x).quant.tokens);
  return metrics_report(all, tok.rq(), p);
}

}  // namespace detail

// Trains tokenizer encoder, codebooks (EMA) and estimator against a frozen
// teacher encoder. No masking. Codebooks are initialized on the first batch
// if the tokenizer was just reset; unused codes are reset on that batch only.
inline PhaseLog train_tokenizer_phase(const Dataset& train, const Dataset& eval,
                                      const ToyEncoder& enc, Tokenizer& tok, const RunConfig& cfg,
                                      std::uint64_t seed, int iteration) {
  BRIDLE_REQUIRE(!tok.encoder.cold_start, ErrorKind::invalid_input,
                 "the cold-start tokenizer is not trained");
  PhaseLog log;
  log.kind = PhaseKind::tokenizer;
  log.iteration = iteration;
  const auto& s = cfg.schedule;
  bool first = true;
  for (int epoch = 0; epoch < s.tokenizer_epochs; ++epoch) {
    double cb = 0.0, cos = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch : detail::batches(detail::epoch_order(train.size(), seed, epoch),
                                             s.batch_size)) {
      if (!tok.initialized()) {
        initialize_codebooks(tok, detail::stack_frames(train, batch), cfg.quantizer,
                             derive_seed(seed, detail::kTagCodebookInit));
        log.pre_metrics = detail::tokenizer_metrics(eval, tok, Provenance::pre_training);
      }
      const auto r = detail::tokenizer_batch(train, batch, enc, tok, cfg, 1.0, s.tokenizer_lr,
                                             first, derive_seed(seed, detail::kTagReset));
      log.codes_reset += r.codes_reset;
      first = false;
      cb += r.cb;
      cos += r.cos;
      ++n_batches;
    }
    EpochLog e;
    e.epoch = epoch;
    e.tokenizer_updates = n_batches;
    e.losses = LossReport::make(0.0, cb / static_cast<double>(n_batches),
                                cos / static_cast<double>(n_batches), cfg.losses.beta,
                                cfg.losses.lambda_cos, cfg.losses.alpha);
    log.epochs.push_back(e);
  }
  if (tok.initialized()) log.post_metrics = detail::tokenizer_metrics(eval, tok, Provenance::post_training);
  return log;
}

inline std::vector<std::size_t> stage_sizes(const QuantizerConfig& qc) {
  return std::vector<std::size_t>(qc.num_codebooks, qc.codebook_size);
}

// Cold-start tokenizer: frozen random projection, codebooks fitted once to
// the first training batch.
inline Tokenizer cold_start_tokenizer(const Dataset& train, const RunConfig& cfg) {
  Tokenizer tok = fresh_tokenizer(cfg.quantizer, train.feature_dim(),
                                  derive_seed(cfg.seed, detail::kTagTokenizer), true);
  std::vector<std::size_t> first(std::min(cfg.schedule.batch_size, train.size()));
  std::iota(first.begin(), first.end(), 0);
  initialize_codebooks(tok, detail::stack_frames(train, first), cfg.quantizer,
                       derive_seed(cfg.seed, detail::kTagCodebookInit));
  return tok;
}

// Encoder phase with the cold-start tokenizer, then (tokenizer reset +
// tokenizer phase, encoder phase) for each further iteration. Evaluation
// follows every encoder phase.
inline RunResult interleave(const Dataset& train, const Dataset& eval, const RunConfig& cfg) {
  validate(cfg);
  const auto& qc = cfg.quantizer;
  const auto ks = stage_sizes(qc);
  RunResult res;
  res.report.config = cfg;
  res.report.chance = 1.0 / static_cast<double>(qc.codebook_size);
  res.encoder = ToyEncoder::random(qc.dim, train.feature_dim(), derive_seed(cfg.seed, detail::kTagEncoder));
  res.tokenizer = cold_start_tokenizer(train, cfg);

  for (int it = 1; it <= cfg.schedule.iterations; ++it) {
    const std::uint64_t it_seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(it));
    if (it > 1) {
      res.tokenizer = fresh_tokenizer(qc, train.feature_dim(),
                                      derive_seed(it_seed, detail::kTagTokenizer), false);
      res.report.phases.push_back(
          train_tokenizer_phase(train, eval, res.encoder, res.tokenizer, cfg, it_seed, it));
    }
    res.decoder = ToyDecoder::random(ks, qc.dim, derive_seed(it_seed, detail::kTagDecoder));
    res.report.phases.push_back(
        train_encoder_phase(train, res.tokenizer, res.encoder, res.decoder, cfg, it_seed, it));
    res.report.evaluations.push_back(evaluate(eval, res.encoder, res.decoder, res.tokenizer, cfg, it));
  }
  res.report.final_accuracy = res.report.evaluations.back().accuracy;
  return res;
}

// Single loop on L_enc + alpha * L_tok. Encoder and decoder step every
// batch; the tokenizer (gradient step and EMA) only every
// `tokenizer_update_every` batches (0 disables tokenizer updates).
inline RunResult joint_train(const Dataset& train, const Dataset& eval, const RunConfig& cfg) {
  validate(cfg);
  const auto& qc = cfg.quantizer;
  const auto& s = cfg.schedule;
  const auto ks = stage_sizes(qc);
  RunResult res;
  res.report.config = cfg;
  res.report.chance = 1.0 / static_cast<double>(qc.codebook_size);
  const std::uint64_t seed = derive_seed(cfg.seed, 2000);
  res.encoder = ToyEncoder::random(qc.dim, train.feature_dim(), derive_seed(cfg.seed, detail::kTagEncoder));
  res.decoder = ToyDecoder::random(ks, qc.dim, derive_seed(seed, detail::kTagDecoder));
  res.tokenizer = fresh_tokenizer(qc, train.feature_dim(), derive_seed(seed, detail::kTagTokenizer), false);

  PhaseLog log;
  log.kind = PhaseKind::joint;
  log.iteration = 1;
  const std::uint64_t mask_seed = derive_seed(seed, detail::kTagMask);
  const int total_epochs = s.iterations * s.encoder_epochs;
  std::uint64_t step = 0;
  bool first_update = true;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    double enc_loss = 0.0, cb = 0.0, cos = 0.0;
    std::size_t n_batches = 0, n_updates = 0;
    for (const auto& batch : detail::batches(detail::epoch_order(train.size(), seed, epoch),
                                             s.batch_size)) {
      if (!res.tokenizer.initialized()) {
        initialize_codebooks(res.tokenizer, detail::stack_frames(train, batch), qc,
                             derive_seed(seed, detail::kTagCodebookInit));
        log.pre_metrics = detail::tokenizer_metrics(eval, res.tokenizer, Provenance::pre_training);
      }
      ++step;
      ToyEncoder genc = zeros_like(res.encoder);
      ToyDecoder gdec = zeros_like(res.decoder);
      const double scale = 1.0 / static_cast<double>(batch.size());
      double loss = 0.0;
      for (std::size_t i : batch) {
        const Matrix& x = train.sequences[i];
        const TokenGrid tokens = tokenize(res.tokenizer, x).quant.tokens;
        const auto mask = sample_mask(x.rows(), s.mask_ratio, derive_seed(mask_seed, step * 1000003ULL + i));
        loss += scale * detail::encoder_step_sequence(res.encoder, res.decoder, x, tokens, mask,
                                                      scale, genc, gdec);
      }
      detail::guard_finite(loss, "encoder loss");
      if (s.tokenizer_update_every > 0 &&
          step % static_cast<std::uint64_t>(s.tokenizer_update_every) == 0) {
        // teacher embeddings from the pre-update encoder
        const auto r = detail::tokenizer_batch(train, batch, res.encoder, res.tokenizer, cfg,
                                               cfg.losses.alpha, s.tokenizer_lr, first_update,
                                               derive_seed(seed, detail::kTagReset));
        log.codes_reset += r.codes_reset;
        first_update = false;
        cb += r.cb;
        cos += r.cos;
        ++n_updates;
      }
      sgd_step(res.encoder, genc, s.encoder_lr);
      sgd_step(res.decoder, gdec, s.encoder_lr);
      enc_loss += loss;
      ++n_batches;
    }
    EpochLog e;
    e.epoch = epoch;
    e.tokenizer_updates = n_updates;
    const double nu = n_updates ? static_cast<double>(n_updates) : 1.0;
    e.losses = LossReport::make(enc_loss / static_cast<double>(n_batches), cb / nu, cos / nu,
                                cfg.losses.beta, cfg.losses.lambda_cos, cfg.losses.alpha);
    log.epochs.push_back(e);
    if (s.encoder_epochs > 0 && (epoch + 1) % s.encoder_epochs == 0)
      res.report.evaluations.push_back(evaluate(eval, res.encoder, res.decoder, res.tokenizer, cfg,
                                                (epoch + 1) / s.encoder_epochs));
  }
  if (res.report.evaluations.empty() && !res.tokenizer.initialized()) {
    std::vector<std::size_t> first(std::min(s.batch_size, train.size()));
    std::iota(first.begin(), first.end(), 0);
    initialize_codebooks(res.tokenizer, detail::stack_frames(train, first), qc,
                         derive_seed(seed, detail::kTagCodebookInit));
  }
  if (res.report.evaluations.empty())
    res.report.evaluations.push_back(evaluate(eval, res.encoder, res.decoder, res.tokenizer, cfg, 0));
  log.post_metrics = detail::tokenizer_metrics(eval, res.tokenizer, Provenance::post_training);
  res.report.phases.push_back(std::move(log));
  res.report.final_accuracy = res.report.evaluations.back().accuracy;
  return res;
}

// Train/eval split of one synthetic draw (shared centers and offsets).
struct SplitDataset {
  Dataset train;
  Dataset eval;
};

inline SplitDataset make_datasets(const RunConfig& cfg) {
  SyntheticDatasetSpec spec = cfg.dataset;
  spec.n_samples = cfg.dataset.n_samples + cfg.eval_samples;
  const Dataset all = gen_synthetic(spec);
  return {all.slice(0, cfg.dataset.n_samples), all.slice(cfg.dataset.n_samples, all.size())};
}

inline RunResult run(const RunConfig& cfg, const SplitDataset& data) {
  return cfg.schedule.joint_mode ? joint_train(data.train, data.eval, cfg)
                                 : interleave(data.train, data.eval, cfg);
}

inline RunResult run(const RunConfig& cfg) { return run(cfg, make_datasets(cfg)); }

}  // namespace bridle
