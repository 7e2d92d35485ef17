#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/quantizer.hpp"

namespace bridle {

struct UsageStats {
  int stage_index = 1;
  std::vector<double> counts;  // raw token counts, or EMA cluster sizes
  double total = 0.0;
  bool degenerate = false;     // total == 0

  std::size_t size() const noexcept { return counts.size(); }

  static UsageStats from_counts(int stage, std::vector<double> counts) {
    UsageStats s;
    s.stage_index = stage;
    s.counts = std::move(counts);
    for (double c : s.counts) {
      BRIDLE_REQUIRE(c >= 0.0, ErrorKind::invalid_input, "usage counts must be non-negative");
      s.total += c;
    }
    s.degenerate = s.total == 0.0;
    return s;
  }
};

inline std::vector<UsageStats> usage_histogram(const TokenGrid& grid,
                                               std::span<const std::size_t> codebook_sizes) {
  BRIDLE_REQUIRE(grid.positions() == 0 || grid.stages() == codebook_sizes.size(),
                 ErrorKind::invalid_input, "token grid stage count does not match quantizer");
  std::vector<std::vector<double>> counts;
  for (std::size_t k : codebook_sizes) counts.emplace_back(k, 0.0);
  for (std::size_t t = 0; t < grid.positions(); ++t) {
    for (std::size_t m = 0; m < codebook_sizes.size(); ++m) {
      const int tok = grid(t, m);
      if (tok < 0 || static_cast<std::size_t>(tok) >= codebook_sizes[m])
        throw Error(ErrorKind::invalid_input,
                    "token " + std::to_string(tok) + " at position " + std::to_string(t) +
                        " out of range for stage " + std::to_string(m + 1));
      counts[m][static_cast<std::size_t>(tok)] += 1.0;
    }
  }
  std::vector<UsageStats> out;
  for (std::size_t m = 0; m < counts.size(); ++m)
    out.push_back(UsageStats::from_counts(static_cast<int>(m) + 1, std::move(counts[m])));
  return out;
}

inline std::vector<UsageStats> usage_histogram(const TokenGrid& grid,
                                               const ResidualQuantizer& rq) {
  const auto ks = rq.codebook_sizes();
  return usage_histogram(grid, ks);
}

// Fraction of codes used at least once.
inline double cur(const UsageStats& stats) {
  BRIDLE_REQUIRE(stats.size() >= 1, ErrorKind::invalid_input, "CUR needs K >= 1");
  const auto used = std::count_if(stats.counts.begin(), stats.counts.end(),
                                  [](double c) { return c > 0.0; });
  return static_cast<double>(used) / static_cast<double>(stats.size());
}

// Shannon entropy (nats) of the usage distribution.
inline double usage_entropy(const UsageStats& stats) {
  if (!(stats.total > 0.0))
    throw Error(ErrorKind::degenerate, "usage entropy undefined for zero total usage");
  // Uniform over the used codes has entropy exactly ln(#used).
  double first = 0.0;
  std::size_t used = 0;
  bool uniform = true;
  for (double c : stats.counts) {
    if (c <= 0.0) continue;
    if (used == 0) first = c;
    uniform = uniform && c == first;
    ++used;
  }
  if (uniform) return std::log(static_cast<double>(used));

  // Summed in sorted order so relabeling codes cannot change the result.
  std::vector<double> positive;
  for (double c : stats.counts)
    if (c > 0.0) positive.push_back(c);  // 0 ln 0 := 0
  std::sort(positive.begin(), positive.end());
  double h = 0.0;
  for (double c : positive) {
    const double p = c / stats.total;
    h -= p * std::log(p);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(stats.size())));
}

inline double ecu(double cur_value, double ue_value, std::size_t K) {
  if (K < 2) throw Error(ErrorKind::invalid_input, "ECU undefined for K < 2 (ln K = 0)");
  return cur_value * ue_value / std::log(static_cast<double>(K));
}

enum class Provenance { pre_training, post_training };

inline const char* to_string(Provenance p) {
  return p == Provenance::pre_training ? "pre_training" : "post_training";
}

struct StageMetrics {
  int stage_index = 1;
  std::size_t codebook_size = 0;
  double cur = 0.0;
  double ue = 0.0;
  double ecu = 0.0;

  bool operator==(const StageMetrics&) const = default;
};

struct MetricsReport {
  Provenance provenance = Provenance::post_training;
  std::vector<StageMetrics> stages;

  bool operator==(const MetricsReport&) const = default;
};

inline StageMetrics stage_metrics(const UsageStats& stats) {
  StageMetrics s;
  s.stage_index = stats.stage_index;
  s.codebook_size = stats.size();
  s.cur = cur(stats);
  s.ue = stats.degenerate ? 0.0 : usage_entropy(stats);
  s.ecu = stats.size() >= 2 ? ecu(s.cur, s.ue, stats.size()) : 0.0;
  return s;
}

inline MetricsReport metrics_report(const std::vector<UsageStats>& stats,
                                    Provenance provenance = Provenance::post_training) {
  MetricsReport r;
  r.provenance = provenance;
  for (const auto& s : stats) r.stages.push_back(stage_metrics(s));
  return r;
}

inline MetricsReport metrics_report(const TokenGrid& grid, const ResidualQuantizer& rq,
                                    Provenance provenance = Provenance::post_training) {
  return metrics_report(usage_histogram(grid, rq), provenance);
}

}  // namespace bridle
