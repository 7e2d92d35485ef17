#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/matrix.hpp"

namespace bridle {

// One stage's K x D code matrix.
struct Codebook {
  int stage_index = 1;  // 1-based position within the quantizer
  Matrix vectors;

  Codebook() = default;
  Codebook(int stage, Matrix codes) : stage_index(stage), vectors(std::move(codes)) {
    validate();
  }

  std::size_t size() const noexcept { return vectors.rows(); }
  std::size_t dim() const noexcept { return vectors.cols(); }
  std::span<const double> code(std::size_t i) const { return vectors.row(i); }

  void validate() const {
    BRIDLE_REQUIRE(vectors.rows() >= 1, ErrorKind::invalid_input, "codebook is empty");
    BRIDLE_REQUIRE(vectors.cols() >= 1, ErrorKind::invalid_input,
                   "codebook dimension must be positive");
    BRIDLE_REQUIRE(all_finite(vectors.flat()), ErrorKind::invalid_input,
                   "codebook contains non-finite values");
  }

  bool operator==(const Codebook&) const = default;
};

enum class Normalization {
  none,        // e_1 = z_t
  input_only,  // e_1 = z_t / |z_t|
  per_stage,   // every stage normalizes its incoming residual first
};

inline const char* to_string(Normalization mode) {
  switch (mode) {
    case Normalization::none: return "none";
    case Normalization::input_only: return "input_only";
    case Normalization::per_stage: return "per_stage";
  }
  return "none";
}

inline Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "input_only") return Normalization::input_only;
  if (s == "per_stage") return Normalization::per_stage;
  throw Error(ErrorKind::invalid_input, "unknown normalization mode '" + s + "'");
}

// L2-normalizes in place; the zero vector is left as is.
inline void normalize_in_place(std::span<double> v) {
  const double n = norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

class ResidualQuantizer {
 public:
  ResidualQuantizer() = default;
  ResidualQuantizer(std::vector<Codebook> stages,
                    Normalization normalization = Normalization::input_only,
                    int soft_k = 1)
      : stages_(std::move(stages)), normalization_(normalization), soft_k_(soft_k) {
    validate();
  }

  std::size_t num_stages() const noexcept { return stages_.size(); }
  std::size_t dim() const noexcept { return stages_.empty() ? 0 : stages_.front().dim(); }
  Normalization normalization() const noexcept { return normalization_; }
  int soft_k() const noexcept { return soft_k_; }

  const Codebook& stage(std::size_t m) const { return stages_.at(m); }
  Codebook& stage(std::size_t m) { return stages_.at(m); }
  const std::vector<Codebook>& stages() const noexcept { return stages_; }

  std::vector<std::size_t> codebook_sizes() const {
    std::vector<std::size_t> ks;
    for (const auto& cb : stages_) ks.push_back(cb.size());
    return ks;
  }

  void validate() const {
    BRIDLE_REQUIRE(!stages_.empty(), ErrorKind::invalid_input,
                   "quantizer needs at least one stage");
    std::size_t min_k = std::numeric_limits<std::size_t>::max();
    for (std::size_t m = 0; m < stages_.size(); ++m) {
      stages_[m].validate();
      BRIDLE_REQUIRE(stages_[m].dim() == stages_.front().dim(), ErrorKind::invalid_input,
                     "all stages must share the latent dimension");
      BRIDLE_REQUIRE(stages_[m].stage_index == static_cast<int>(m) + 1,
                     ErrorKind::invalid_input, "stage indices must be 1..M in order");
      min_k = std::min(min_k, stages_[m].size());
    }
    BRIDLE_REQUIRE(soft_k_ >= 1 && static_cast<std::size_t>(soft_k_) <= min_k,
                   ErrorKind::invalid_input, "soft_k must lie in [1, min K_m]");
  }

  bool operator==(const ResidualQuantizer&) const = default;

 private:
  std::vector<Codebook> stages_;
  Normalization normalization_ = Normalization::input_only;
  int soft_k_ = 1;
};

// T x M matrix of selected code indices.
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t positions, std::size_t stages)
      : positions_(positions), stages_(stages), data_(positions * stages, 0) {}

  std::size_t positions() const noexcept { return positions_; }
  std::size_t stages() const noexcept { return stages_; }

  int& operator()(std::size_t t, std::size_t m) { return data_[t * stages_ + m]; }
  int operator()(std::size_t t, std::size_t m) const { return data_[t * stages_ + m]; }

  std::span<const int> row(std::size_t t) const { return {data_.data() + t * stages_, stages_}; }

  void append(const TokenGrid& other) {
    if (positions_ == 0) stages_ = other.stages_;
    BRIDLE_REQUIRE(other.stages_ == stages_, ErrorKind::invalid_input,
                   "token grids disagree on stage count");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    positions_ += other.positions_;
  }

  bool operator==(const TokenGrid&) const = default;

 private:
  std::size_t positions_ = 0;
  std::size_t stages_ = 0;
  std::vector<int> data_;
};

struct SoftAssignment {
  std::vector<int> indices;  // ascending distance, ties by index
  Vector weights;            // uniform 1/k
  Vector effective_code;     // weighted sum of the selected codes
};

struct QuantizationResult {
  TokenGrid tokens;              // T x M
  Matrix quantized;              // T x D, q_t
  std::vector<Matrix> residuals; // M + 1 entries of T x D: e_1 .. e_{M+1}
  // Soft-code mode only (soft_k > 1): T x M x k indices and weights.
  std::optional<std::vector<int>> soft_indices;
  std::optional<Vector> soft_weights;
};

struct NearestCode {
  int index = 0;
  double sq_dist = 0.0;
};

inline NearestCode nearest_code(std::span<const double> e, const Codebook& cb) {
  BRIDLE_REQUIRE(e.size() == cb.dim(), ErrorKind::invalid_input,
                 "residual dimension " + std::to_string(e.size()) +
                     " does not match codebook dimension " + std::to_string(cb.dim()));
  BRIDLE_REQUIRE(cb.size() >= 1, ErrorKind::invalid_input, "codebook is empty");
  NearestCode best{0, squared_distance(e, cb.code(0))};
  for (std::size_t i = 1; i < cb.size(); ++i) {
    const double d = squared_distance(e, cb.code(i));
    if (d < best.sq_dist) best = {static_cast<int>(i), d};  // strict: lowest index wins ties
  }
  return best;
}

struct StageOutput {
  int index = 0;
  Vector code;
  Vector next_residual;
};

inline StageOutput quantize_stage(std::span<const double> e, const Codebook& cb) {
  const NearestCode nc = nearest_code(e, cb);
  StageOutput out;
  out.index = nc.index;
  const auto code = cb.code(static_cast<std::size_t>(nc.index));
  out.code.assign(code.begin(), code.end());
  out.next_residual.resize(e.size());
  for (std::size_t d = 0; d < e.size(); ++d) out.next_residual[d] = e[d] - code[d];
  return out;
}

inline SoftAssignment soft_assign(std::span<const double> e, const Codebook& cb, int k) {
  BRIDLE_REQUIRE(e.size() == cb.dim(), ErrorKind::invalid_input, "dimension mismatch");
  BRIDLE_REQUIRE(k >= 1 && static_cast<std::size_t>(k) <= cb.size(),
                 ErrorKind::invalid_input, "soft assignment k out of range");
  std::vector<std::pair<double, int>> order(cb.size());
  for (std::size_t i = 0; i < cb.size(); ++i)
    order[i] = {squared_distance(e, cb.code(i)), static_cast<int>(i)};
  std::partial_sort(order.begin(), order.begin() + k, order.end());

  SoftAssignment out;
  out.weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  out.effective_code.assign(cb.dim(), 0.0);
  for (int j = 0; j < k; ++j) {
    out.indices.push_back(order[static_cast<std::size_t>(j)].second);
    axpy(out.weights[static_cast<std::size_t>(j)],
         cb.code(static_cast<std::size_t>(order[static_cast<std::size_t>(j)].second)),
         out.effective_code);
  }
  return out;
}

inline QuantizationResult quantize(const Matrix& z, const ResidualQuantizer& rq) {
  const std::size_t T = z.rows();
  const std::size_t D = rq.dim();
  const std::size_t M = rq.num_stages();
  BRIDLE_REQUIRE(z.cols() == D, ErrorKind::invalid_input,
                 "latent dimension " + std::to_string(z.cols()) +
                     " does not match quantizer dimension " + std::to_string(D));
  BRIDLE_REQUIRE(all_finite(z.flat()), ErrorKind::invalid_input,
                 "latent sequence contains non-finite values");

  const int k = rq.soft_k();
  QuantizationResult res;
  res.tokens = TokenGrid(T, M);
  res.quantized = Matrix(T, D);
  res.residuals.assign(M + 1, Matrix(T, D));
  if (k > 1) {
    res.soft_indices.emplace(T * M * static_cast<std::size_t>(k));
    res.soft_weights.emplace(T * M * static_cast<std::size_t>(k));
  }

  Vector e(D);
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(z.row(t).begin(), z.row(t).end(), e.begin());
    if (rq.normalization() != Normalization::none) normalize_in_place(e);
    for (std::size_t m = 0; m < M; ++m) {
      if (m > 0 && rq.normalization() == Normalization::per_stage) normalize_in_place(e);
      std::copy(e.begin(), e.end(), res.residuals[m].row(t).begin());
      const Codebook& cb = rq.stage(m);
      if (k == 1) {
        const NearestCode nc = nearest_code(e, cb);
        res.tokens(t, m) = nc.index;
        const auto code = cb.code(static_cast<std::size_t>(nc.index));
        axpy(1.0, code, res.quantized.row(t));
        axpy(-1.0, code, e);
      } else {
        const SoftAssignment sa = soft_assign(e, cb, k);
        res.tokens(t, m) = sa.indices.front();
        const std::size_t base = (t * M + m) * static_cast<std::size_t>(k);
        for (int j = 0; j < k; ++j) {
          (*res.soft_indices)[base + static_cast<std::size_t>(j)] = sa.indices[static_cast<std::size_t>(j)];
          (*res.soft_weights)[base + static_cast<std::size_t>(j)] = sa.weights[static_cast<std::size_t>(j)];
        }
        axpy(1.0, sa.effective_code, res.quantized.row(t));
        axpy(-1.0, sa.effective_code, e);
      }
    }
    std::copy(e.begin(), e.end(), res.residuals[M].row(t).begin());
  }
  return res;
}

inline Vector reconstruct(std::span<const int> tokens, const ResidualQuantizer& rq) {
  BRIDLE_REQUIRE(tokens.size() == rq.num_stages(), ErrorKind::invalid_input,
                 "token row length must equal the number of stages");
  Vector out(rq.dim(), 0.0);
  for (std::size_t m = 0; m < tokens.size(); ++m) {
    const Codebook& cb = rq.stage(m);
    BRIDLE_REQUIRE(tokens[m] >= 0 && static_cast<std::size_t>(tokens[m]) < cb.size(),
                   ErrorKind::invalid_input,
                   "token " + std::to_string(tokens[m]) + " out of range for stage " +
                       std::to_string(m + 1));
    axpy(1.0, cb.code(static_cast<std::size_t>(tokens[m])), out);
  }
  return out;
}

// Mean over positions of |e_1 - q|^2 = |e_{M+1}|^2 (hard assignment).
inline double quantization_mse(const QuantizationResult& res) {
  const Matrix& last = res.residuals.back();
  if (last.rows() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < last.rows(); ++t) s += squared_norm(last.row(t));
  return s / static_cast<double>(last.rows());
}

}  // namespace bridle
