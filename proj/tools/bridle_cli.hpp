#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bridle/bridle.hpp"

namespace bridle::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kDivergence = 3 };

namespace fs = std::filesystem;

inline std::string error_line(const std::string& kind, const std::string& message,
                              const std::string& key = {}) {
  io::Json j{{"error", kind}, {"message", message}};
  if (!key.empty()) j["key"] = key;
  return j.dump();
}

inline std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("BRIDLE_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::exception&) {
    throw ValidationError("BRIDLE_SEED", "not an unsigned integer");
  }
}

// Relative output paths land in BRIDLE_OUT_DIR when it is set.
inline fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  const char* dir = std::getenv("BRIDLE_OUT_DIR");
  if (p.is_relative() && dir && *dir) {
    fs::create_directories(dir);
    return fs::path(dir) / p;
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

inline void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) out << text;
  else io::write_file_atomic(resolve_out(out_path), text);
}

struct ConfigFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

inline void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "named preset (desk-rq, desk-vq, full-rq, full-vq)");
  cmd->add_option("--seed", f.seed, "run seed (also seeds the dataset)");
}

// Precedence: --seed, then BRIDLE_SEED, then the config file, then defaults.
inline RunConfig load_config(const ConfigFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : io::parse_config_file(f.config_path);
  if (!f.preset.empty()) {
    if (!f.config_path.empty())
      throw ValidationError("preset", "--preset and --config are mutually exclusive");
    cfg = preset_config(f.preset);
  }
  std::optional<std::uint64_t> seed = f.seed ? f.seed : env_seed();
  if (seed) cfg = with_seed(cfg, *seed);
  validate(cfg);
  return cfg;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-quantized tokenizer toolkit"};
  app.require_subcommand(1, 1);

  ConfigFlags train_cfg;
  std::string train_out_dir;
  std::string train_mode;
  auto* train = app.add_subcommand("train", "run interleaved or joint training");
  add_config_flags(train, train_cfg);
  train->add_option("--out-dir", train_out_dir, "directory for report.json and codebooks.brqc");
  train->add_option("--mode", train_mode, "override schedule: interleave or joint")
      ->check(CLI::IsMember({"interleave", "joint"}));

  std::string q_archive, q_input, q_format = "text", q_out;
  std::size_t q_T = 0, q_F = 0;
  auto* quant = app.add_subcommand("quantize", "map latent frames to token grids");
  quant->add_option("--archive", q_archive, "codebook archive")->required()->check(CLI::ExistingFile);
  quant->add_option("--input", q_input, "latent frames, D values per row")->required()->check(CLI::ExistingFile);
  quant->add_option("--format", q_format, "text or raw")->check(CLI::IsMember({"text", "raw"}));
  quant->add_option("--seq-len", q_T, "frames per sequence (raw format)");
  quant->add_option("--frame-dim", q_F, "values per frame (raw format)");
  quant->add_option("--out", q_out, "token grid CSV (default: stdout)");

  std::string m_archive, m_grid, m_out;
  auto* metrics = app.add_subcommand("metrics", "CUR / UE / ECU per stage from a token grid");
  metrics->add_option("--archive", m_archive, "codebook archive")->required()->check(CLI::ExistingFile);
  metrics->add_option("--grid", m_grid, "token grid CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("--out", m_out, "report path (default: stdout)");

  double c_gamma = 0.99, c_eps = 1e-5;
  long c_steps = 5000;
  std::size_t c_K = 16, c_D = 8;
  std::uint64_t c_seed = 1;
  std::string c_out;
  auto* conv = app.add_subcommand("convergence-check", "EMA convergence on a constant stream");
  conv->add_option("--gamma", c_gamma, "EMA decay");
  conv->add_option("--eps", c_eps, "Laplace smoothing epsilon");
  conv->add_option("--steps", c_steps, "number of EMA steps");
  conv->add_option("--codes", c_K, "codebook size");
  conv->add_option("--dim", c_D, "code dimension");
  auto* c_seed_opt = conv->add_option("--seed", c_seed, "stream seed");
  conv->add_option("--out", c_out, "report path (default: stdout)");

  ConfigFlags cmp_cfg;
  std::size_t cmp_seeds = 10;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare-vq-rq", "paired VQ vs RQ runs at equal code budget");
  add_config_flags(cmp, cmp_cfg);
  cmp->add_option("--seeds", cmp_seeds, "number of paired seeds")->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out, "report path (default: stdout)");

  ConfigFlags gen_cfg;
  std::string gen_out, gen_format = "text", gen_labels;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic feature dataset");
  add_config_flags(gen, gen_cfg);
  gen->add_option("--out", gen_out, "feature file")->required();
  gen->add_option("--format", gen_format, "text or raw")->check(CLI::IsMember({"text", "raw"}));
  gen->add_option("--labels", gen_labels, "optional CSV of per-frame labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << error_line("usage", e.what()) << "\n";
    return kUsage;
  }

  try {
    if (*train) {
      RunConfig cfg = load_config(train_cfg);
      if (!train_mode.empty()) cfg.schedule.joint_mode = train_mode == "joint";
      const RunResult res = run(cfg);
      const fs::path dir = resolve_out(train_out_dir.empty() ? "." : train_out_dir);
      fs::create_directories(dir);
      io::write_file_atomic(dir / "report.json", io::format_report(res.report));
      const auto& ema = res.tokenizer.ema;
      const bool with_ema = ema.size() == res.tokenizer.rq().num_stages();
      io::save_codebooks(dir / "codebooks.brqc", res.tokenizer.rq(), with_ema ? &ema : nullptr);
      out << io::Json{{"final_accuracy", res.report.final_accuracy},
                      {"chance", res.report.chance},
                      {"report", (dir / "report.json").string()},
                      {"archive", (dir / "codebooks.brqc").string()}}
                 .dump()
          << "\n";
    } else if (*quant) {
      const auto archive = io::load_codebooks(q_archive);
      const auto fmt = io::parse_feature_format(q_format);
      if (fmt == io::FeatureFormat::raw_float32 && (q_T == 0 || q_F == 0))
        throw ValidationError("seq-len", "raw format needs --seq-len and --frame-dim");
      const Dataset data = io::ingest_features(q_input, fmt, q_T, q_F);
      std::vector<TokenGrid> grids;
      for (const auto& seq : data.sequences) grids.push_back(quantize(seq, archive.quantizer).tokens);
      emit(io::format_token_grids(grids), q_out, out);
    } else if (*metrics) {
      const auto archive = io::load_codebooks(m_archive);
      TokenGrid all;
      for (const auto& g : io::parse_token_grids(io::read_file_text(m_grid))) all.append(g);
      emit(io::format_report(metrics_report(all, archive.quantizer)), m_out, out);
    } else if (*conv) {
      if (c_seed_opt->count() == 0)
        if (auto s = env_seed()) c_seed = *s;
      if (!(c_gamma > 0.0 && c_gamma < 1.0)) throw ValidationError("gamma", "must lie in (0, 1)");
      if (!(c_eps > 0.0)) throw ValidationError("eps", "must be > 0");
      if (c_steps < 1) throw ValidationError("steps", "must be >= 1");
      emit(io::format_report(convergence_experiment(c_K, c_D, c_gamma, c_eps, c_steps, c_seed)),
           c_out, out);
    } else if (*cmp) {
      const RunConfig cfg = load_config(cmp_cfg);
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < cmp_seeds; ++i) seeds.push_back(cfg.seed + i);
      emit(io::format_report(vq_vs_rq_experiment(cfg, seeds)), cmp_out, out);
    } else if (*gen) {
      const RunConfig cfg = load_config(gen_cfg);
      const Dataset data = gen_synthetic(cfg.dataset);
      const fs::path path = resolve_out(gen_out);
      if (gen_format == "raw") io::write_file_atomic(path, io::format_raw_float32(data));
      else io::write_file_atomic(path, io::format_text_features(data));
      if (!gen_labels.empty()) {
        std::ostringstream labels;
        labels << "sequence,position,coarse,fine\n";
        for (std::size_t s = 0; s < data.size(); ++s)
          for (std::size_t t = 0; t < data.coarse_labels[s].size(); ++t)
            labels << s << ',' << t << ',' << data.coarse_labels[s][t] << ','
                   << data.fine_labels[s][t] << '\n';
        io::write_file_atomic(resolve_out(gen_labels), labels.str());
      }
    }
  } catch (const ValidationError& e) {
    err << error_line("validation", e.what(), e.key()) << "\n";
    return kValidation;
  } catch (const Error& e) {
    err << error_line(to_string(e.kind()), e.what()) << "\n";
    const bool numeric = e.kind() == ErrorKind::divergence || e.kind() == ErrorKind::bound_violation;
    return numeric ? kDivergence : kValidation;
  } catch (const std::exception& e) {
    err << error_line("io", e.what()) << "\n";
    return kValidation;
  }
  return kOk;
}

}  // namespace bridle::cli
