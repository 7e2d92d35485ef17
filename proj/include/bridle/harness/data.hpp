#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "bridle/config.hpp"
#include "bridle/error.hpp"
#include "bridle/matrix.hpp"
#include "bridle/random.hpp"

namespace bridle {

struct Dataset {
  std::vector<Matrix> sequences;                 // each T x F
  std::vector<std::vector<int>> coarse_labels;   // per sequence, per frame
  std::vector<std::vector<int>> fine_labels;

  std::size_t size() const noexcept { return sequences.size(); }
  std::size_t seq_len() const { return sequences.empty() ? 0 : sequences.front().rows(); }
  std::size_t feature_dim() const { return sequences.empty() ? 0 : sequences.front().cols(); }

  // Sequences [begin, end) as a new dataset.
  Dataset slice(std::size_t begin, std::size_t end) const {
    Dataset out;
    for (std::size_t i = begin; i < end && i < size(); ++i) {
      out.sequences.push_back(sequences[i]);
      if (i < coarse_labels.size()) out.coarse_labels.push_back(coarse_labels[i]);
      if (i < fine_labels.size()) out.fine_labels.push_back(fine_labels[i]);
    }
    return out;
  }

  // All frames stacked into one (N*T) x F matrix.
  Matrix stacked() const {
    Matrix out;
    for (const auto& s : sequences)
      for (std::size_t t = 0; t < s.rows(); ++t) out.append_row(s.row(t));
    return out;
  }
};

struct SyntheticWorld {
  Matrix coarse;  // coarse_centers x F
  Matrix fine;    // fine_offsets x F
};

inline SyntheticWorld synthetic_world(const SyntheticDatasetSpec& spec) {
  Rng rng = make_rng(spec.seed, 0x776f726c64);
  std::normal_distribution<double> unit(0.0, 1.0);
  SyntheticWorld w{Matrix(spec.coarse_centers, spec.feature_dim),
                   Matrix(spec.fine_offsets, spec.feature_dim)};
  for (double& v : w.coarse.flat()) v = spec.coarse_scale * unit(rng);
  for (double& v : w.fine.flat()) v = spec.fine_scale * unit(rng);
  return w;
}

inline Dataset gen_synthetic(const SyntheticDatasetSpec& spec) {
  BRIDLE_REQUIRE(spec.n_samples >= 1 && spec.seq_len >= 1 && spec.feature_dim >= 1 &&
                     spec.coarse_centers >= 1 && spec.fine_offsets >= 1,
                 ErrorKind::invalid_input, "dataset sizes must be positive");
  const SyntheticWorld world = synthetic_world(spec);
  Rng rng = make_rng(spec.seed, 0x73616d70);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick_coarse(0, static_cast<int>(spec.coarse_centers) - 1);
  std::uniform_int_distribution<int> pick_fine(0, static_cast<int>(spec.fine_offsets) - 1);

  Dataset ds;
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const int seq_coarse = pick_coarse(rng);
    const int seq_fine = pick_fine(rng);
    Matrix x(spec.seq_len, spec.feature_dim);
    std::vector<int> cl(spec.seq_len), fl(spec.seq_len);
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      cl[t] = coin(rng) < spec.label_persistence ? seq_coarse : pick_coarse(rng);
      fl[t] = coin(rng) < spec.label_persistence ? seq_fine : pick_fine(rng);
      auto row = x.row(t);
      for (std::size_t f = 0; f < spec.feature_dim; ++f) {
        row[f] = world.coarse(static_cast<std::size_t>(cl[t]), f) +
                 world.fine(static_cast<std::size_t>(fl[t]), f);
        if (spec.noise_sigma > 0.0) row[f] += spec.noise_sigma * noise(rng);
      }
    }
    ds.sequences.push_back(std::move(x));
    ds.coarse_labels.push_back(std::move(cl));
    ds.fine_labels.push_back(std::move(fl));
  }
  return ds;
}

// Exactly round(ratio * T) masked positions (clamped to [1, T-1]), chosen
// uniformly without replacement.
inline std::vector<bool> sample_mask(std::size_t T, double ratio, std::uint64_t seed) {
  BRIDLE_REQUIRE(T >= 2, ErrorKind::invalid_input, "masking needs T >= 2");
  BRIDLE_REQUIRE(ratio > 0.0 && ratio < 1.0, ErrorKind::invalid_input,
                 "mask ratio must lie in (0, 1)");
  auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(T)));
  count = std::clamp<std::size_t>(count, 1, T - 1);
  Rng rng = make_rng(seed, 0x6d61736b);
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::vector<bool> mask(T, false);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, T - 1);
    std::swap(order[i], order[pick(rng)]);
    mask[order[i]] = true;
  }
  return mask;
}

}  // namespace bridle
