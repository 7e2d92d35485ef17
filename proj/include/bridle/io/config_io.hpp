#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <variant>

#include <nlohmann/json.hpp>

#include "bridle/config.hpp"
#include "bridle/io/file.hpp"

namespace bridle::io {

using Json = nlohmann::ordered_json;

namespace detail {

// One entry per accepted key, pointing at the field it controls.
static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are stored as size_t fields");
using FieldRef = std::variant<std::size_t*, int*, double*, bool*, Normalization*, InitMode*>;

inline std::map<std::string, FieldRef> config_fields(RunConfig& c) {
  auto& d = c.dataset;
  auto& q = c.quantizer;
  auto& l = c.losses;
  auto& s = c.schedule;
  return {
      {"seed", &c.seed},
      {"eval_samples", &c.eval_samples},
      {"n_samples", &d.n_samples},
      {"seq_len", &d.seq_len},
      {"feature_dim", &d.feature_dim},
      {"coarse_centers", &d.coarse_centers},
      {"fine_offsets", &d.fine_offsets},
      {"coarse_scale", &d.coarse_scale},
      {"fine_scale", &d.fine_scale},
      {"noise_sigma", &d.noise_sigma},
      {"label_persistence", &d.label_persistence},
      {"data_seed", &d.seed},
      {"num_codebooks", &q.num_codebooks},
      {"codebook_size", &q.codebook_size},
      {"dim", &q.dim},
      {"normalization", &q.normalization},
      {"soft_k", &q.soft_k},
      {"init_mode", &q.init_mode},
      {"kmeans_steps", &q.kmeans_steps},
      {"gamma", &q.gamma},
      {"epsilon", &q.epsilon},
      {"reset_threshold", &q.reset_threshold},
      {"beta", &l.beta},
      {"lambda_cos", &l.lambda_cos},
      {"alpha", &l.alpha},
      {"iterations", &s.iterations},
      {"encoder_epochs", &s.encoder_epochs},
      {"tokenizer_epochs", &s.tokenizer_epochs},
      {"batch_size", &s.batch_size},
      {"mask_ratio", &s.mask_ratio},
      {"encoder_lr", &s.encoder_lr},
      {"tokenizer_lr", &s.tokenizer_lr},
      {"joint_mode", &s.joint_mode},
      {"tokenizer_update_every", &s.tokenizer_update_every},
  };
}

template <typename T>
T read_integer(const std::string& key, const Json& v) {
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) throw ValidationError(key, "expected a non-negative integer");
  } else {
    if (!v.is_number_integer()) throw ValidationError(key, "expected an integer");
  }
  return v.get<T>();
}

inline void assign(const std::string& key, const Json& v, FieldRef ref) {
  std::visit(
      [&](auto* field) {
        using T = std::remove_pointer_t<decltype(field)>;
        if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) throw ValidationError(key, "expected a number");
          *field = v.get<double>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ValidationError(key, "expected true or false");
          *field = v.get<bool>();
        } else if constexpr (std::is_same_v<T, Normalization>) {
          if (!v.is_string()) throw ValidationError(key, "expected a string");
          try {
            *field = parse_normalization(v.get<std::string>());
          } catch (const Error& e) {
            throw ValidationError(key, e.what());
          }
        } else if constexpr (std::is_same_v<T, InitMode>) {
          if (!v.is_string()) throw ValidationError(key, "expected a string");
          try {
            *field = parse_init_mode(v.get<std::string>());
          } catch (const Error& e) {
            throw ValidationError(key, e.what());
          }
        } else {
          *field = read_integer<T>(key, v);
        }
      },
      ref);
}

}  // namespace detail

// Flat JSON object of named keys. "preset" is applied first, then every other
// key overrides it. "seed" also seeds the dataset unless "data_seed" is given.
inline RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("<root>", "config must be a JSON object");
  RunConfig cfg;
  if (auto it = j.find("preset"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("preset", "expected a string");
    cfg = preset_config(it->get<std::string>());
  }
  auto fields = detail::config_fields(cfg);
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    auto f = fields.find(key);
    if (f == fields.end()) throw ValidationError(key, "unknown key");
    detail::assign(key, value, f->second);
  }
  if (j.contains("seed") && !j.contains("data_seed")) cfg.dataset.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    RunConfig cfg;
    validate(cfg);
    return cfg;
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_file_text(path));
}

inline Json config_to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Json j;
  j["preset"] = cfg.preset;
  for (const auto& [key, ref] : detail::config_fields(copy)) {
    std::visit(
        [&, k = key](auto* field) {
          using T = std::remove_pointer_t<decltype(field)>;
          if constexpr (std::is_same_v<T, Normalization> || std::is_same_v<T, InitMode>)
            j[k] = to_string(*field);
          else
            j[k] = *field;
        },
        ref);
  }
  return j;
}

inline std::string serialize_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2); }

}  // namespace bridle::io
