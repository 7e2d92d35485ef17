#pragma once

#include <cstdint>
#include <vector>

#include "bridle/config.hpp"
#include "bridle/harness/training.hpp"

namespace bridle {

// Re-seeds every random stream of a config (model init, masks, data).
inline RunConfig with_seed(RunConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.dataset.seed = seed;
  return cfg;
}

struct ArmSummary {
  double mse = 0.0;
  double accuracy = 0.0;
  double chance = 0.0;
  MetricsReport metrics;

  double mean_cur() const {
    double s = 0.0;
    for (const auto& st : metrics.stages) s += st.cur;
    return metrics.stages.empty() ? 0.0 : s / static_cast<double>(metrics.stages.size());
  }
  double min_cur() const {
    double s = 1.0;
    for (const auto& st : metrics.stages) s = std::min(s, st.cur);
    return s;
  }
};

struct PairedRun {
  std::uint64_t seed = 0;
  ArmSummary vq;
  ArmSummary rq;
};

struct ComparisonReport {
  RunConfig vq_config;
  RunConfig rq_config;
  std::vector<PairedRun> runs;
  std::size_t rq_lower_mse = 0;    // seeds where RQ MSE < VQ MSE
  std::size_t rq_cur_at_least = 0; // seeds where every RQ stage CUR >= VQ CUR
  std::size_t rq_wins_both = 0;
};

inline ArmSummary summarize(const RunResult& r) {
  const Evaluation& ev = r.report.evaluations.back();
  return {ev.mse, ev.accuracy, r.report.chance, ev.metrics};
}

// VQ (M = 1) against RQ with the same total number of codes, on identical
// data and seeds. Both arms run the configured training protocol.
inline ComparisonReport vq_vs_rq_experiment(const RunConfig& base, std::size_t rq_stages,
                                            std::size_t rq_codebook_size,
                                            const std::vector<std::uint64_t>& seeds) {
  ComparisonReport rep;
  rep.rq_config = base;
  rep.rq_config.quantizer.num_codebooks = rq_stages;
  rep.rq_config.quantizer.codebook_size = rq_codebook_size;
  rep.vq_config = base;
  rep.vq_config.quantizer.num_codebooks = 1;
  rep.vq_config.quantizer.codebook_size = rq_stages * rq_codebook_size;
  validate(rep.rq_config);
  validate(rep.vq_config);
  for (std::uint64_t seed : seeds) {
    const RunConfig vq = with_seed(rep.vq_config, seed);
    const RunConfig rq = with_seed(rep.rq_config, seed);
    const SplitDataset data = make_datasets(rq);
    PairedRun pr;
    pr.seed = seed;
    pr.vq = summarize(run(vq, data));
    pr.rq = summarize(run(rq, data));
    const bool mse_win = pr.rq.mse < pr.vq.mse;
    const bool cur_win = pr.rq.min_cur() >= pr.vq.min_cur();
    rep.rq_lower_mse += mse_win ? 1 : 0;
    rep.rq_cur_at_least += cur_win ? 1 : 0;
    rep.rq_wins_both += (mse_win && cur_win) ? 1 : 0;
    rep.runs.push_back(std::move(pr));
  }
  return rep;
}

inline ComparisonReport vq_vs_rq_experiment(const RunConfig& base,
                                            const std::vector<std::uint64_t>& seeds) {
  return vq_vs_rq_experiment(base, base.quantizer.num_codebooks, base.quantizer.codebook_size,
                             seeds);
}

}  // namespace bridle
