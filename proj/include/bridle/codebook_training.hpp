#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/matrix.hpp"
#include "bridle/quantizer.hpp"
#include "bridle/random.hpp"

namespace bridle {

enum class InitMode { uniform, kmeans };

inline const char* to_string(InitMode mode) {
  return mode == InitMode::uniform ? "uniform" : "kmeans";
}

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "uniform") return InitMode::uniform;
  if (s == "kmeans") return InitMode::kmeans;
  throw Error(ErrorKind::invalid_input, "unknown init mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Initialization

// Components i.i.d. uniform on [-1, 1].
inline Codebook init_uniform(std::size_t K, std::size_t D, std::uint64_t seed,
                             int stage_index = 1) {
  BRIDLE_REQUIRE(K >= 1 && D >= 1, ErrorKind::invalid_input,
                 "codebook size and dimension must be positive");
  Rng rng = make_rng(seed, 0x756e69);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix codes(K, D);
  for (double& v : codes.flat()) v = dist(rng);
  return Codebook(stage_index, std::move(codes));
}

// Lloyd's algorithm seeded with K distinct batch points. An empty cluster
// takes the point farthest from its current centroid.
inline Codebook init_kmeans(const Matrix& batch, std::size_t K, int steps,
                            std::uint64_t seed, int stage_index = 1) {
  const std::size_t S = batch.rows();
  const std::size_t D = batch.cols();
  BRIDLE_REQUIRE(K >= 1, ErrorKind::invalid_input, "K must be positive");
  BRIDLE_REQUIRE(steps >= 0, ErrorKind::invalid_input, "k-means steps must be >= 0");
  if (S < K)
    throw Error(ErrorKind::insufficient_data,
                "k-means needs at least K=" + std::to_string(K) + " points, got " +
                    std::to_string(S));
  BRIDLE_REQUIRE(all_finite(batch.flat()), ErrorKind::invalid_input,
                 "k-means batch contains non-finite values");

  // Seeds are K distinct batch points drawn with probability proportional to
  // the squared distance to the nearest seed already chosen (k-means++).
  Rng rng = make_rng(seed, 0x6b6d);
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(S, false);
  Vector d2(S, std::numeric_limits<double>::infinity());
  auto take = [&](std::size_t j) {
    chosen.push_back(j);
    taken[j] = true;
    for (std::size_t r = 0; r < S; ++r)
      d2[r] = taken[r] ? 0.0 : std::min(d2[r], squared_distance(batch.row(r), batch.row(j)));
  };
  take(std::uniform_int_distribution<std::size_t>(0, S - 1)(rng));
  while (chosen.size() < K) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = S;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t r = 0; r < S && pick == S; ++r) {
        if (d2[r] <= 0.0) continue;
        if (u < d2[r]) pick = r;
        else u -= d2[r];
      }
      if (pick == S)  // round-off at the top end
        for (std::size_t r = S; r-- > 0 && pick == S;)
          if (d2[r] > 0.0) pick = r;
    } else {
      // Every remaining point duplicates a seed.
      std::vector<std::size_t> rest;
      for (std::size_t r = 0; r < S; ++r)
        if (!taken[r]) rest.push_back(r);
      pick = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
    take(pick);
  }
  Matrix centroids(K, D);
  for (std::size_t i = 0; i < K; ++i)
    std::copy(batch.row(chosen[i]).begin(), batch.row(chosen[i]).end(),
              centroids.row(i).begin());

  std::vector<int> assign(S);
  Vector dist(S);
  for (int step = 0; step < steps; ++step) {
    const Codebook current(stage_index, centroids);
    for (std::size_t j = 0; j < S; ++j) {
      const NearestCode nc = nearest_code(batch.row(j), current);
      assign[j] = nc.index;
      dist[j] = nc.sq_dist;
    }
    Matrix sums(K, D);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t j = 0; j < S; ++j) {
      axpy(1.0, batch.row(j), sums.row(static_cast<std::size_t>(assign[j])));
      ++counts[static_cast<std::size_t>(assign[j])];
    }
    for (std::size_t i = 0; i < K; ++i) {
      if (counts[i] > 0) {
        for (std::size_t d = 0; d < D; ++d)
          centroids(i, d) = sums(i, d) / static_cast<double>(counts[i]);
        continue;
      }
      const auto far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy(batch.row(far).begin(), batch.row(far).end(), centroids.row(i).begin());
      dist[far] = -1.0;  // do not hand the same point to two empty clusters
    }
  }
  return Codebook(stage_index, std::move(centroids));
}

struct QuantizerShape {
  std::vector<std::size_t> codebook_sizes;  // K_m per stage
  std::size_t dim = 0;
  Normalization normalization = Normalization::input_only;
  int soft_k = 1;
};

// Stage 1 is fitted to the (normalized) latents, stage m to the residuals
// left by stages 1..m-1.
inline ResidualQuantizer fit_rq_init(const Matrix& batch, const QuantizerShape& shape,
                                     InitMode mode, std::uint64_t seed,
                                     int kmeans_steps = 10) {
  BRIDLE_REQUIRE(batch.rows() >= 1, ErrorKind::invalid_input, "init batch is empty");
  BRIDLE_REQUIRE(batch.cols() == shape.dim, ErrorKind::invalid_input,
                 "init batch dimension mismatch");
  BRIDLE_REQUIRE(!shape.codebook_sizes.empty(), ErrorKind::invalid_input,
                 "quantizer needs at least one stage");

  Matrix residual = batch;
  if (shape.normalization != Normalization::none)
    for (std::size_t j = 0; j < residual.rows(); ++j) normalize_in_place(residual.row(j));

  std::vector<Codebook> stages;
  for (std::size_t m = 0; m < shape.codebook_sizes.size(); ++m) {
    const int stage_index = static_cast<int>(m) + 1;
    const std::uint64_t stage_seed = derive_seed(seed, m);
    if (mode == InitMode::uniform) {
      stages.push_back(init_uniform(shape.codebook_sizes[m], shape.dim, stage_seed, stage_index));
      continue;
    }
    if (m > 0 && shape.normalization == Normalization::per_stage)
      for (std::size_t j = 0; j < residual.rows(); ++j) normalize_in_place(residual.row(j));
    Codebook cb = init_kmeans(residual, shape.codebook_sizes[m], kmeans_steps, stage_seed,
                              stage_index);
    for (std::size_t j = 0; j < residual.rows(); ++j) {
      const NearestCode nc = nearest_code(residual.row(j), cb);
      axpy(-1.0, cb.code(static_cast<std::size_t>(nc.index)), residual.row(j));
    }
    stages.push_back(std::move(cb));
  }
  return ResidualQuantizer(std::move(stages), shape.normalization, shape.soft_k);
}

// ---------------------------------------------------------------------------
// EMA codebook learning

struct EmaState {
  double gamma = 0.99;
  double epsilon = 1e-5;
  long step = 0;
  Vector counts;     // N_i
  Vector smoothed;   // N_hat_i from the last update (0 before the first)
  Matrix embed_sum;  // m_i

  // N_{i,0} = 0, m_{i,0} = c_{i,0}.
  static EmaState initial(const Codebook& cb, double gamma, double epsilon) {
    BRIDLE_REQUIRE(gamma >= 0.0 && gamma < 1.0, ErrorKind::invalid_input,
                   "EMA decay must lie in [0, 1)");
    BRIDLE_REQUIRE(epsilon >= 0.0, ErrorKind::invalid_input, "epsilon must be >= 0");
    EmaState s;
    s.gamma = gamma;
    s.epsilon = epsilon;
    s.counts.assign(cb.size(), 0.0);
    s.smoothed.assign(cb.size(), 0.0);
    s.embed_sum = cb.vectors;
    return s;
  }

  // Starts from observed usage instead of zero: N_0 = counts and
  // m_0 = N_hat_0 * c_0, so the code readout m / N_hat reproduces `cb`
  // before the first update. Falls back to `initial` when all counts are 0.
  static EmaState warm_start(const Codebook& cb, std::span<const double> counts, double gamma,
                             double epsilon);

  std::size_t size() const noexcept { return counts.size(); }
  bool operator==(const EmaState&) const = default;
};

struct BatchAssignment {
  Matrix latents;          // S x D
  std::vector<int> codes;  // assigned code per sample
};

struct EmaUpdate {
  EmaState state;
  Codebook codebook;
};

struct SmoothedCounts {
  Vector values;
  bool degenerate = false;  // sum N = 0; values are all zero
};

// N_hat_i = (N_i + eps) * sum(N) / (sum(N) + K eps). Preserves sum(N).
inline SmoothedCounts laplace_smooth(std::span<const double> counts, double epsilon) {
  const double K = static_cast<double>(counts.size());
  double total = 0.0;
  for (double n : counts) {
    BRIDLE_REQUIRE(n >= 0.0, ErrorKind::invalid_input, "counts must be non-negative");
    total += n;
  }
  SmoothedCounts out;
  out.values.resize(counts.size());
  if (total == 0.0) {
    out.degenerate = true;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  const double scale = total / (total + K * epsilon);
  for (std::size_t i = 0; i < counts.size(); ++i)
    out.values[i] = (counts[i] + epsilon) * scale;
  return out;
}

inline EmaState EmaState::warm_start(const Codebook& cb, std::span<const double> usage,
                                     double gamma, double epsilon) {
  BRIDLE_REQUIRE(usage.size() == cb.size(), ErrorKind::invalid_input,
                 "warm start needs one count per code");
  EmaState s = initial(cb, gamma, epsilon);
  SmoothedCounts smoothed = laplace_smooth(usage, epsilon);
  if (smoothed.degenerate) return s;
  s.counts.assign(usage.begin(), usage.end());
  s.smoothed = std::move(smoothed.values);
  for (std::size_t i = 0; i < cb.size(); ++i)
    for (std::size_t d = 0; d < cb.dim(); ++d) s.embed_sum(i, d) = s.smoothed[i] * cb.vectors(i, d);
  return s;
}

namespace detail {

struct BatchStats {
  Vector n;   // n_i
  Matrix l;   // l_i
};

inline BatchStats batch_stats(const EmaState& state, const Codebook& cb,
                              const BatchAssignment& batch) {
  const std::size_t K = cb.size();
  BRIDLE_REQUIRE(state.size() == K && state.embed_sum.rows() == K &&
                     state.embed_sum.cols() == cb.dim(),
                 ErrorKind::invalid_input, "EMA state does not match codebook");
  BRIDLE_REQUIRE(batch.latents.rows() == batch.codes.size(), ErrorKind::invalid_input,
                 "batch latents and codes differ in length");
  BRIDLE_REQUIRE(batch.latents.rows() == 0 || batch.latents.cols() == cb.dim(),
                 ErrorKind::invalid_input, "batch latent dimension mismatch");
  BatchStats s{Vector(K, 0.0), Matrix(K, cb.dim())};
  for (std::size_t j = 0; j < batch.codes.size(); ++j) {
    const int q = batch.codes[j];
    BRIDLE_REQUIRE(q >= 0 && static_cast<std::size_t>(q) < K, ErrorKind::invalid_input,
                   "assigned code out of range");
    s.n[static_cast<std::size_t>(q)] += 1.0;
    axpy(1.0, batch.latents.row(j), s.l.row(static_cast<std::size_t>(q)));
  }
  return s;
}

}  // namespace detail

// Operational update, applied once per batch:
//   N <- gamma N + (1-gamma) n
//   N_hat <- laplace_smooth(N)
//   m <- gamma m + (1-gamma) l
//   c <- m / N_hat
inline EmaUpdate ema_step(const EmaState& state, const Codebook& cb,
                          const BatchAssignment& batch) {
  BRIDLE_REQUIRE(state.epsilon > 0.0, ErrorKind::invalid_input,
                 "operational EMA needs epsilon > 0");
  const auto stats = detail::batch_stats(state, cb, batch);
  const double g = state.gamma;
  EmaUpdate out{state, cb};
  EmaState& s = out.state;
  for (std::size_t i = 0; i < s.size(); ++i) s.counts[i] = g * s.counts[i] + (1.0 - g) * stats.n[i];
  SmoothedCounts smoothed = laplace_smooth(s.counts, s.epsilon);
  if (smoothed.degenerate)
    throw Error(ErrorKind::degenerate,
                "EMA counts are all zero; the first update needs a non-empty batch");
  s.smoothed = std::move(smoothed.values);
  for (std::size_t i = 0; i < s.size(); ++i) {
    BRIDLE_REQUIRE(s.smoothed[i] > 0.0, ErrorKind::degenerate, "smoothed count is not positive");
    auto m = s.embed_sum.row(i);
    auto l = stats.l.row(i);
    auto c = out.codebook.vectors.row(i);
    for (std::size_t d = 0; d < m.size(); ++d) {
      m[d] = g * m[d] + (1.0 - g) * l[d];
      c[d] = m[d] / s.smoothed[i];
    }
  }
  ++s.step;
  return out;
}

// The rewritten recurrence used in the convergence analysis: epsilon enters
// N itself and the code update carries the explicit ratio correction.
inline EmaUpdate ema_step_proof_form(const EmaState& state, const Codebook& cb,
                                     const BatchAssignment& batch) {
  const auto stats = detail::batch_stats(state, cb, batch);
  const double g = state.gamma;
  const double eps = state.epsilon;
  const double K = static_cast<double>(state.size());
  Vector base(state.size());
  double base_total = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    base[i] = g * state.counts[i] + (1.0 - g) * stats.n[i];
    base_total += base[i];
  }
  if (base_total == 0.0)
    throw Error(ErrorKind::degenerate, "proof-form EMA ratio has a zero denominator");
  const double ratio = (base_total + K * eps) / base_total;

  EmaUpdate out{state, cb};
  EmaState& s = out.state;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double denom = base[i] + eps;
    BRIDLE_REQUIRE(denom > 0.0, ErrorKind::degenerate, "proof-form EMA divisor is zero");
    s.counts[i] = denom;
    s.smoothed[i] = denom / ratio;
    auto m = s.embed_sum.row(i);
    auto l = stats.l.row(i);
    auto c = out.codebook.vectors.row(i);
    for (std::size_t d = 0; d < m.size(); ++d) {
      m[d] = g * m[d] + (1.0 - g) * l[d];
      c[d] = m[d] / denom * ratio;
    }
  }
  ++s.step;
  return out;
}

struct ClosedFormLimit {
  Vector n_inf;
  Matrix l_inf;
  Vector N_inf;  // n + eps / (1 - gamma)
  Matrix m_inf;  // = l_inf
  Matrix c_inf;
};

// Fixed point of the proof-form recurrence for a constant (assignment, latent) stream.
inline ClosedFormLimit closed_form_limit(std::span<const double> n_inf, const Matrix& l_inf,
                                         double gamma, double epsilon) {
  const std::size_t K = n_inf.size();
  BRIDLE_REQUIRE(l_inf.rows() == K, ErrorKind::invalid_input,
                 "n_inf and l_inf disagree on K");
  BRIDLE_REQUIRE(gamma >= 0.0 && gamma < 1.0, ErrorKind::invalid_input,
                 "gamma must lie in [0, 1)");
  BRIDLE_REQUIRE(epsilon >= 0.0, ErrorKind::invalid_input, "epsilon must be >= 0");
  double n_total = 0.0;
  for (double n : n_inf) {
    BRIDLE_REQUIRE(n >= 0.0, ErrorKind::invalid_input, "n_inf must be non-negative");
    n_total += n;
  }
  if (n_total == 0.0 && epsilon == 0.0)
    throw Error(ErrorKind::degenerate, "limit undefined when every n_inf and epsilon are 0");

  ClosedFormLimit out;
  out.n_inf.assign(n_inf.begin(), n_inf.end());
  out.l_inf = l_inf;
  out.m_inf = l_inf;
  out.N_inf.resize(K);
  out.c_inf = Matrix(K, l_inf.cols());

  const double carry = gamma * epsilon / (1.0 - gamma);
  double num_total = 0.0;
  double den_total = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    out.N_inf[i] = n_inf[i] + epsilon / (1.0 - gamma);
    num_total += n_inf[i] + carry + epsilon;
    den_total += n_inf[i] + carry;
  }
  const double ratio = num_total / den_total;
  for (std::size_t i = 0; i < K; ++i) {
    const double denom = n_inf[i] + carry + epsilon;
    // With epsilon = 0 an unused code has l = 0 and no defined limit; report 0.
    if (denom == 0.0) continue;
    for (std::size_t d = 0; d < l_inf.cols(); ++d)
      out.c_inf(i, d) = l_inf(i, d) / denom * ratio;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dead-code reset

struct ResetResult {
  Codebook codebook;
  std::vector<bool> mask;

  std::size_t num_reset() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  }
};

// Codes used fewer than `threshold` times are replaced by batch latents
// drawn uniformly (without replacement while enough latents remain).
inline ResetResult reset_unused(const Codebook& cb, std::span<const double> usage_counts,
                                const Matrix& latents, double threshold,
                                std::uint64_t seed) {
  BRIDLE_REQUIRE(latents.rows() >= 1, ErrorKind::invalid_input, "reset needs latents");
  BRIDLE_REQUIRE(latents.cols() == cb.dim(), ErrorKind::invalid_input,
                 "latent dimension mismatch");
  BRIDLE_REQUIRE(usage_counts.size() == cb.size(), ErrorKind::invalid_input,
                 "usage counts must have one entry per code");
  ResetResult out{cb, std::vector<bool>(cb.size(), false)};
  Rng rng = make_rng(seed, 0x7273);
  std::vector<std::size_t> pool(latents.rows());
  std::iota(pool.begin(), pool.end(), 0);
  std::size_t remaining = pool.size();
  for (std::size_t i = 0; i < cb.size(); ++i) {
    if (usage_counts[i] >= threshold) continue;
    if (remaining == 0) remaining = pool.size();
    std::uniform_int_distribution<std::size_t> pick(0, remaining - 1);
    const std::size_t slot = pick(rng);
    const std::size_t j = pool[slot];
    std::swap(pool[slot], pool[remaining - 1]);
    --remaining;
    std::copy(latents.row(j).begin(), latents.row(j).end(),
              out.codebook.vectors.row(i).begin());
    out.mask[i] = true;
  }
  return out;
}

// N_i <- 0, m_i <- new code for every reset code.
inline void reset_ema_entries(EmaState& state, const Codebook& cb,
                              const std::vector<bool>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    state.counts[i] = 0.0;
    state.smoothed[i] = 0.0;
    std::copy(cb.code(i).begin(), cb.code(i).end(), state.embed_sum.row(i).begin());
  }
}

}  // namespace bridle
