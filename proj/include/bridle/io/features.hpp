#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bridle/error.hpp"
#include "bridle/harness/data.hpp"
#include "bridle/io/file.hpp"
#include "bridle/matrix.hpp"
#include "bridle/quantizer.hpp"

namespace bridle::io {

enum class FeatureFormat { delimited_text, raw_float32 };

inline FeatureFormat parse_feature_format(const std::string& s) {
  if (s == "text" || s == "delimited-text") return FeatureFormat::delimited_text;
  if (s == "raw" || s == "raw-float32") return FeatureFormat::raw_float32;
  throw Error(ErrorKind::invalid_input, "unknown feature format '" + s + "'");
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ',' || c == ';' || c == ' ' || c == '\t' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, p};
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

// One row per frame; blank lines separate sequences. A first line that does
// not parse as numbers is taken as a header. Row numbers in errors are 1-based
// line numbers of the input.
inline Dataset parse_text_features(const std::string& text) {
  Dataset out;
  Matrix current;
  std::size_t width = 0;
  bool seen_data = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (current.rows() > 0) out.sequences.push_back(std::move(current));
    current = Matrix();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) {
      flush();
      continue;
    }
    const auto fields = detail::split_fields(line);
    Vector row(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size() && numeric; ++i)
      numeric = detail::parse_double(fields[i], row[i]);
    if (!numeric) {
      if (!seen_data) {
        seen_data = true;  // header row
        continue;
      }
      throw Error(ErrorKind::format, "row " + std::to_string(lineno) + ": non-numeric field");
    }
    seen_data = true;
    for (double v : row)
      if (!std::isfinite(v))
        throw Error(ErrorKind::invalid_input,
                    "row " + std::to_string(lineno) + ": non-finite value");
    if (width == 0) width = row.size();
    if (row.size() != width)
      throw Error(ErrorKind::format, "row " + std::to_string(lineno) + ": ragged row with " +
                                         std::to_string(row.size()) + " fields, expected " +
                                         std::to_string(width));
    current.append_row(row);
  }
  flush();
  if (out.sequences.empty()) throw Error(ErrorKind::insufficient_data, "no feature rows found");
  return out;
}

// Little-endian float32 frames, T*F values per sequence.
inline Dataset parse_raw_float32(const std::vector<unsigned char>& bytes, std::size_t T,
                                 std::size_t F) {
  BRIDLE_REQUIRE(T >= 1 && F >= 1, ErrorKind::invalid_input, "raw format needs T and F >= 1");
  const std::size_t per_seq = T * F * 4;
  if (bytes.empty() || bytes.size() % per_seq != 0)
    throw Error(ErrorKind::format, "raw feature file has " + std::to_string(bytes.size()) +
                                       " bytes, not a multiple of T*F*4 = " +
                                       std::to_string(per_seq));
  Dataset out;
  std::size_t pos = 0;
  const std::size_t n = bytes.size() / per_seq;
  for (std::size_t s = 0; s < n; ++s) {
    Matrix m(T, F);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[pos++]} << (8 * b);
        const double v = std::bit_cast<float>(bits);
        if (!std::isfinite(v))
          throw Error(ErrorKind::invalid_input,
                      "row " + std::to_string(s * T + t + 1) + ": non-finite value");
        m(t, f) = v;
      }
    }
    out.sequences.push_back(std::move(m));
  }
  return out;
}

inline Dataset ingest_features(const std::filesystem::path& path, FeatureFormat format,
                               std::size_t T = 0, std::size_t F = 0) {
  if (format == FeatureFormat::delimited_text) return parse_text_features(read_file_text(path));
  return parse_raw_float32(read_file_bytes(path), T, F);
}

inline std::string format_text_features(const Dataset& data) {
  std::string out;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (s > 0) out += '\n';
    const Matrix& m = data.sequences[s];
    for (std::size_t t = 0; t < m.rows(); ++t) {
      for (std::size_t f = 0; f < m.cols(); ++f) {
        if (f > 0) out += ',';
        out += detail::format_double(m(t, f));
      }
      out += '\n';
    }
  }
  return out;
}

inline std::vector<unsigned char> format_raw_float32(const Dataset& data) {
  std::vector<unsigned char> out;
  for (const auto& m : data.sequences)
    for (double v : m.flat()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  return out;
}

// Token grids as CSV: sequence,position,stage_1..stage_M with 0-based indices.
inline std::string format_token_grids(const std::vector<TokenGrid>& grids) {
  const std::size_t M = grids.empty() ? 0 : grids.front().stages();
  std::string out = "sequence,position";
  for (std::size_t m = 0; m < M; ++m) out += ",stage_" + std::to_string(m + 1);
  out += '\n';
  for (std::size_t s = 0; s < grids.size(); ++s) {
    BRIDLE_REQUIRE(grids[s].stages() == M, ErrorKind::invalid_input,
                   "token grids disagree on stage count");
    for (std::size_t t = 0; t < grids[s].positions(); ++t) {
      out += std::to_string(s) + ',' + std::to_string(t);
      for (std::size_t m = 0; m < M; ++m) out += ',' + std::to_string(grids[s](t, m));
      out += '\n';
    }
  }
  return out;
}

inline std::vector<TokenGrid> parse_token_grids(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t M = 0;
  std::vector<std::vector<std::vector<int>>> rows;  // sequence -> position -> stage
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    const auto fields = detail::split_fields(line);
    if (lineno == 1 && !fields.empty() && fields.front() == "sequence") {
      BRIDLE_REQUIRE(fields.size() >= 3, ErrorKind::format, "token grid header has no stages");
      M = fields.size() - 2;
      continue;
    }
    if (M == 0) {
      BRIDLE_REQUIRE(fields.size() >= 3, ErrorKind::format, "token grid row has no stages");
      M = fields.size() - 2;
    }
    if (fields.size() != M + 2)
      throw Error(ErrorKind::format, "row " + std::to_string(lineno) + ": expected " +
                                         std::to_string(M + 2) + " fields");
    std::vector<long> v(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      auto [p, ec] = std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v[i]);
      if (ec != std::errc() || p != fields[i].data() + fields[i].size() || v[i] < 0)
        throw Error(ErrorKind::format,
                    "row " + std::to_string(lineno) + ": bad integer '" + std::string(fields[i]) + "'");
    }
    const auto s = static_cast<std::size_t>(v[0]);
    const auto t = static_cast<std::size_t>(v[1]);
    if (s >= rows.size()) rows.resize(s + 1);
    if (t != rows[s].size())
      throw Error(ErrorKind::format,
                  "row " + std::to_string(lineno) + ": positions must be consecutive from 0");
    rows[s].emplace_back(v.begin() + 2, v.end());
  }
  std::vector<TokenGrid> out;
  for (const auto& seq : rows) {
    TokenGrid g(seq.size(), M);
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t m = 0; m < M; ++m) g(t, m) = seq[t][m];
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace bridle::io
