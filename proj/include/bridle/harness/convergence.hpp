#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "bridle/codebook_training.hpp"
#include "bridle/error.hpp"
#include "bridle/matrix.hpp"
#include "bridle/random.hpp"

namespace bridle {

// A stream whose (assignment, latent) pairs never change.
struct ConstantStream {
  Matrix latents;          // S x D
  std::vector<int> codes;  // S
};

struct ConvergenceReport {
  std::size_t K = 0;
  std::size_t D = 0;
  std::size_t S = 0;
  double gamma = 0.0;
  double epsilon = 0.0;
  long steps = 0;
  double max_count_deviation = 0.0;  // max_i |N_i - N_inf_i| after the last step
  double max_code_deviation = 0.0;   // max_i |c_i - c_inf_i|
  double initial_count_deviation = 0.0;
  double initial_code_deviation = 0.0;
  // Smallest C with |c_t - c_inf| <= C gamma^t over steps whose deviation
  // is still above round-off.
  double geometric_constant = 0.0;
  Vector code_deviations;  // per code, after the last step
  double embed_bound = 0.0;  // |c_0| + sum |z|, max over codes
  double count_bound = 0.0;  // S + eps / (1 - gamma)
  long bound_checks = 0;
  ClosedFormLimit limit;
};

namespace detail {

inline void deviations(const EmaState& s, const Codebook& cb, const ClosedFormLimit& lim,
                       double& count_dev, double& code_dev, Vector* per_code = nullptr) {
  count_dev = 0.0;
  code_dev = 0.0;
  if (per_code) per_code->assign(cb.size(), 0.0);
  for (std::size_t i = 0; i < cb.size(); ++i) {
    count_dev = std::max(count_dev, std::abs(s.counts[i] - lim.N_inf[i]));
    const double d = std::sqrt(squared_distance(cb.code(i), lim.c_inf.row(i)));
    code_dev = std::max(code_dev, d);
    if (per_code) (*per_code)[i] = d;
  }
}

}  // namespace detail

// Iterates the proof-form EMA on a constant stream and measures the distance
// to the closed-form limit. Both uniform bounds (|m_i| and N_i) are checked
// at every step; a violation throws BoundViolation.
inline ConvergenceReport convergence_experiment(const Codebook& initial, const ConstantStream& stream,
                                                double gamma, double epsilon, long steps) {
  BRIDLE_REQUIRE(steps >= 0, ErrorKind::invalid_input, "steps must be >= 0");
  BRIDLE_REQUIRE(gamma > 0.0 && gamma < 1.0, ErrorKind::invalid_input, "gamma must lie in (0, 1)");
  BRIDLE_REQUIRE(epsilon > 0.0, ErrorKind::invalid_input, "epsilon must be > 0");
  const std::size_t K = initial.size();
  const std::size_t D = initial.dim();
  const std::size_t S = stream.codes.size();
  BRIDLE_REQUIRE(stream.latents.rows() == S && (S == 0 || stream.latents.cols() == D),
                 ErrorKind::invalid_input, "stream shape mismatch");

  const BatchAssignment batch{stream.latents, stream.codes};
  Vector n(K, 0.0);
  Matrix l(K, D);
  double latent_norm_sum = 0.0;
  for (std::size_t j = 0; j < S; ++j) {
    const auto q = static_cast<std::size_t>(stream.codes[j]);
    BRIDLE_REQUIRE(q < K, ErrorKind::invalid_input, "stream code out of range");
    n[q] += 1.0;
    axpy(1.0, stream.latents.row(j), l.row(q));
    latent_norm_sum += norm(stream.latents.row(j));
  }

  ConvergenceReport rep;
  rep.K = K;
  rep.D = D;
  rep.S = S;
  rep.gamma = gamma;
  rep.epsilon = epsilon;
  rep.steps = steps;
  rep.limit = closed_form_limit(n, l, gamma, epsilon);
  rep.count_bound = static_cast<double>(S) + epsilon / (1.0 - gamma);

  Vector embed_bound(K);
  for (std::size_t i = 0; i < K; ++i) {
    embed_bound[i] = norm(initial.code(i)) + latent_norm_sum;
    rep.embed_bound = std::max(rep.embed_bound, embed_bound[i]);
  }
  constexpr double kSlack = 1e-12;

  EmaState state = EmaState::initial(initial, gamma, epsilon);
  Codebook cb = initial;
  detail::deviations(state, cb, rep.limit, rep.initial_count_deviation, rep.initial_code_deviation);
  rep.max_count_deviation = rep.initial_count_deviation;
  rep.max_code_deviation = rep.initial_code_deviation;
  rep.geometric_constant = rep.initial_code_deviation;

  double gamma_pow = 1.0;
  for (long t = 1; t <= steps; ++t) {
    EmaUpdate up = ema_step_proof_form(state, cb, batch);
    state = std::move(up.state);
    cb = std::move(up.codebook);
    for (std::size_t i = 0; i < K; ++i) {
      const double m_norm = norm(state.embed_sum.row(i));
      if (m_norm > embed_bound[i] * (1.0 + kSlack))
        throw BoundViolation(t, "|m_" + std::to_string(i) + "| = " + std::to_string(m_norm) +
                                    " exceeds bound " + std::to_string(embed_bound[i]));
      if (state.counts[i] > rep.count_bound * (1.0 + kSlack))
        throw BoundViolation(t, "N_" + std::to_string(i) + " = " + std::to_string(state.counts[i]) +
                                    " exceeds bound " + std::to_string(rep.count_bound));
      rep.bound_checks += 2;
    }
    detail::deviations(state, cb, rep.limit, rep.max_count_deviation, rep.max_code_deviation,
                       t == steps ? &rep.code_deviations : nullptr);
    gamma_pow *= gamma;
    if (rep.max_code_deviation > 1e-10)
      rep.geometric_constant = std::max(rep.geometric_constant, rep.max_code_deviation / gamma_pow);
  }
  if (steps == 0) detail::deviations(state, cb, rep.limit, rep.max_count_deviation,
                                     rep.max_code_deviation, &rep.code_deviations);
  return rep;
}

// Seeded constant stream: uniform initial codes, S = 4K Gaussian latents,
// latent j assigned to code j mod K.
inline ConstantStream make_constant_stream(std::size_t K, std::size_t D, std::uint64_t seed) {
  ConstantStream s{Matrix(4 * K, D), std::vector<int>(4 * K)};
  Rng rng = make_rng(seed, 0x636f6e76);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (double& v : s.latents.flat()) v = unit(rng);
  for (std::size_t j = 0; j < s.codes.size(); ++j) s.codes[j] = static_cast<int>(j % K);
  return s;
}

inline ConvergenceReport convergence_experiment(std::size_t K, std::size_t D, double gamma,
                                                double epsilon, long steps, std::uint64_t seed) {
  BRIDLE_REQUIRE(K >= 1 && D >= 1, ErrorKind::invalid_input, "K and D must be positive");
  const Codebook c0 = init_uniform(K, D, derive_seed(seed, 1));
  return convergence_experiment(c0, make_constant_stream(K, D, derive_seed(seed, 2)), gamma,
                                epsilon, steps);
}

}  // namespace bridle
