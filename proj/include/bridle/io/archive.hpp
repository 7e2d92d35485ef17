#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bridle/codebook_training.hpp"
#include "bridle/error.hpp"
#include "bridle/io/file.hpp"
#include "bridle/quantizer.hpp"

// Codebook archive layout (all integers and floats little-endian):
//
//   "BRQC"            4 bytes magic
//   u32 version       currently 1
//   u32 M, u32 D
//   u32 float_width   4 or 8
//   u32 normalization 0 none, 1 input_only, 2 per_stage
//   u32 soft_k
//   u32 flags         bit 0: EMA block present
//   u32 K_m           x M
//   codes             stage-major, K_m x D values per stage
//   EMA block         per stage: f64 gamma, f64 epsilon, u64 step,
//                     N[K], N_hat[K], m[K x D]  (float_width each)

namespace bridle::io {

inline constexpr char kArchiveMagic[4] = {'B', 'R', 'Q', 'C'};
inline constexpr std::uint32_t kArchiveVersion = 1;

struct CodebookArchive {
  ResidualQuantizer quantizer;
  std::optional<std::vector<EmaState>> ema;

  bool operator==(const CodebookArchive&) const = default;
};

namespace detail {

class Writer {
 public:
  explicit Writer(std::uint32_t width) : width_(width) {}

  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void real(double v) {
    if (width_ == 8) f64(v);
    else put(std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::uint32_t width_;
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  void set_width(std::uint32_t w) { width_ = w; }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  double real() {
    if (width_ == 8) return f64();
    return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get(4))));
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorKind::format, "archive truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
  std::uint32_t width_ = 8;
};

}  // namespace detail

inline std::size_t archive_header_size(std::size_t num_stages) { return 32 + 4 * num_stages; }

inline std::vector<unsigned char> encode_archive(const ResidualQuantizer& rq,
                                                 const std::vector<EmaState>* ema = nullptr,
                                                 std::uint32_t float_width = 8) {
  BRIDLE_REQUIRE(float_width == 4 || float_width == 8, ErrorKind::invalid_input,
                 "float width must be 4 or 8");
  if (ema)
    BRIDLE_REQUIRE(ema->size() == rq.num_stages(), ErrorKind::invalid_input,
                   "EMA state count must match the number of stages");
  detail::Writer w(float_width);
  w.raw(kArchiveMagic, 4);
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(rq.num_stages()));
  w.u32(static_cast<std::uint32_t>(rq.dim()));
  w.u32(float_width);
  w.u32(static_cast<std::uint32_t>(rq.normalization()));
  w.u32(static_cast<std::uint32_t>(rq.soft_k()));
  w.u32(ema ? 1u : 0u);
  for (const auto& cb : rq.stages()) w.u32(static_cast<std::uint32_t>(cb.size()));
  for (const auto& cb : rq.stages())
    for (double v : cb.vectors.flat()) w.real(v);
  if (ema) {
    for (std::size_t m = 0; m < ema->size(); ++m) {
      const EmaState& s = (*ema)[m];
      BRIDLE_REQUIRE(s.size() == rq.stage(m).size(), ErrorKind::invalid_input,
                     "EMA state size does not match its codebook");
      w.f64(s.gamma);
      w.f64(s.epsilon);
      w.u64(static_cast<std::uint64_t>(s.step));
      for (double v : s.counts) w.real(v);
      for (double v : s.smoothed) w.real(v);
      for (double v : s.embed_sum.flat()) w.real(v);
    }
  }
  return w.take();
}

inline CodebookArchive decode_archive(const std::vector<unsigned char>& bytes) {
  detail::Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kArchiveMagic, 4) != 0)
    throw Error(ErrorKind::format, "not a codebook archive (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kArchiveVersion)
    throw Error(ErrorKind::format, "unsupported archive version " + std::to_string(version));
  const std::uint32_t M = r.u32();
  const std::uint32_t D = r.u32();
  const std::uint32_t width = r.u32();
  if (width != 4 && width != 8) throw Error(ErrorKind::format, "bad float width " + std::to_string(width));
  r.set_width(width);
  const std::uint32_t norm_mode = r.u32();
  if (norm_mode > 2) throw Error(ErrorKind::format, "bad normalization mode");
  const auto soft_k = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  if (M == 0 || D == 0) throw Error(ErrorKind::format, "archive declares an empty quantizer");
  std::vector<std::uint32_t> ks(M);
  for (auto& k : ks) k = r.u32();

  std::uint64_t payload = 0;
  for (auto k : ks) payload += std::uint64_t{k} * D * width;
  if (flags & 1u)
    for (auto k : ks) payload += 24 + (2 * std::uint64_t{k} + std::uint64_t{k} * D) * width;
  if (r.remaining() != payload)
    throw Error(ErrorKind::format, "archive payload is " + std::to_string(r.remaining()) +
                                       " bytes, expected " + std::to_string(payload));

  std::vector<Codebook> stages;
  for (std::uint32_t m = 0; m < M; ++m) {
    Matrix codes(ks[m], D);
    for (double& v : codes.flat()) v = r.real();
    stages.emplace_back(static_cast<int>(m) + 1, std::move(codes));
  }
  CodebookArchive out{ResidualQuantizer(std::move(stages), static_cast<Normalization>(norm_mode), soft_k),
                      std::nullopt};
  if (flags & 1u) {
    std::vector<EmaState> ema;
    for (std::uint32_t m = 0; m < M; ++m) {
      EmaState s;
      s.gamma = r.f64();
      s.epsilon = r.f64();
      s.step = static_cast<long>(r.u64());
      s.counts.resize(ks[m]);
      s.smoothed.resize(ks[m]);
      s.embed_sum = Matrix(ks[m], D);
      for (double& v : s.counts) v = r.real();
      for (double& v : s.smoothed) v = r.real();
      for (double& v : s.embed_sum.flat()) v = r.real();
      ema.push_back(std::move(s));
    }
    out.ema = std::move(ema);
  }
  return out;
}

inline std::size_t save_codebooks(const std::filesystem::path& path, const ResidualQuantizer& rq,
                                  const std::vector<EmaState>* ema = nullptr,
                                  std::uint32_t float_width = 8) {
  const auto bytes = encode_archive(rq, ema, float_width);
  write_file_atomic(path, bytes);
  return bytes.size();
}

inline CodebookArchive load_codebooks(const std::filesystem::path& path) {
  return decode_archive(read_file_bytes(path));
}

}  // namespace bridle::io
