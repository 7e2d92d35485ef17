#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bridle/bridle.hpp"
#include "oracles.hpp"

using namespace bridle;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bridle_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ResidualQuantizer random_rq(std::size_t M, std::size_t K, std::size_t D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ResidualQuantizer(oracle::random_stages(std::vector<std::size_t>(M, K), D, rng));
}

std::vector<EmaState> random_ema(const ResidualQuantizer& rq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<EmaState> out;
  for (const auto& cb : rq.stages()) {
    Vector usage(cb.size());
    for (double& u : usage) u = static_cast<double>(rng() % 5);
    usage[0] += 1;
    EmaState s = EmaState::warm_start(cb, usage, 0.99, 1e-5);
    s.step = static_cast<long>(rng() % 1000);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(ConfigIo, EmptyTextGivesDefaults) {
  const RunConfig cfg = io::parse_config_text("");
  EXPECT_EQ(cfg, RunConfig{});
  EXPECT_EQ(cfg.quantizer.gamma, 0.99);
  EXPECT_EQ(cfg.quantizer.reset_threshold, 1.0);
  EXPECT_EQ(cfg.schedule.mask_ratio, 0.8);
  EXPECT_EQ(io::parse_config_text("{}"), RunConfig{});
}

TEST(ConfigIo, OutOfRangeNamesTheKey) {
  try {
    io::parse_config_text(R"({"gamma": 1.5})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "gamma");
  }
  for (const char* bad : {R"({"epsilon": 0})", R"({"mask_ratio": 1.0})", R"({"codebook_size": -3})",
                          R"({"normalization": "sideways"})", R"({"batch_size": 0.5})"}) {
    EXPECT_THROW(io::parse_config_text(bad), ValidationError) << bad;
  }
}

TEST(ConfigIo, UnknownKeyRejected) {
  try {
    io::parse_config_text(R"({"gama": 0.9})");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "gama");
  }
  EXPECT_THROW(io::parse_config_text("{not json"), ValidationError);
  EXPECT_THROW(io::parse_config_text("[1, 2]"), ValidationError);
}

TEST(ConfigIo, RoundTrip) {
  RunConfig cfg = preset_config("desk-vq");
  cfg.seed = 77;
  cfg.dataset.seed = 5;
  cfg.quantizer.normalization = Normalization::per_stage;
  cfg.quantizer.init_mode = InitMode::uniform;
  cfg.quantizer.epsilon = 3.3e-7;
  cfg.losses.lambda_cos = 0.1 + 0.2;
  cfg.schedule.joint_mode = true;
  EXPECT_EQ(io::parse_config_text(io::serialize_config(cfg)), cfg);
  EXPECT_EQ(io::parse_config_text(io::serialize_config(RunConfig{})), RunConfig{});
}

TEST(ConfigIo, PresetThenOverridesAndSeedPropagation) {
  const RunConfig cfg = io::parse_config_text(R"({"codebook_size": 32, "preset": "desk-vq", "seed": 9})");
  EXPECT_EQ(cfg.quantizer.num_codebooks, 1u);
  EXPECT_EQ(cfg.quantizer.codebook_size, 32u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.dataset.seed, 9u);
  const RunConfig split = io::parse_config_text(R"({"seed": 9, "data_seed": 4})");
  EXPECT_EQ(split.dataset.seed, 4u);
  EXPECT_THROW(io::parse_config_text(R"({"preset": "huge"})"), ValidationError);
}

TEST(ConfigIo, ReadsFile) {
  const fs::path dir = temp_dir("config");
  std::ofstream(dir / "c.json") << R"({"iterations": 3})";
  EXPECT_EQ(io::parse_config_file(dir / "c.json").schedule.iterations, 3);
  std::ofstream(dir / "empty.json").close();
  EXPECT_EQ(io::parse_config_file(dir / "empty.json"), RunConfig{});
}

TEST(Archive, PayloadSizeForDeskShape) {
  const ResidualQuantizer rq = random_rq(4, 16, 8, 1);
  const auto bytes = io::encode_archive(rq);
  EXPECT_EQ(bytes.size() - io::archive_header_size(4), 4u * 16 * 8 * 8);
  EXPECT_EQ(io::encode_archive(rq, nullptr, 4).size() - io::archive_header_size(4), 4u * 16 * 8 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "BRQC");
}

TEST(Archive, RoundTripIsIdentity) {
  const ResidualQuantizer rq = ResidualQuantizer(random_rq(3, 5, 4, 2).stages(), Normalization::per_stage, 2);
  const auto ema = random_ema(rq, 3);
  const io::CodebookArchive a = io::decode_archive(io::encode_archive(rq, &ema));
  EXPECT_EQ(a.quantizer, rq);
  ASSERT_TRUE(a.ema.has_value());
  EXPECT_EQ(*a.ema, ema);
  const io::CodebookArchive plain = io::decode_archive(io::encode_archive(rq));
  EXPECT_FALSE(plain.ema.has_value());
}

TEST(Archive, SaveLoadSaveIsByteIdentical) {
  const fs::path dir = temp_dir("archive");
  const ResidualQuantizer rq = random_rq(4, 16, 8, 4);
  const auto ema = random_ema(rq, 5);
  const std::size_t written = io::save_codebooks(dir / "a.brqc", rq, &ema);
  EXPECT_EQ(written, fs::file_size(dir / "a.brqc"));
  const io::CodebookArchive loaded = io::load_codebooks(dir / "a.brqc");
  io::save_codebooks(dir / "b.brqc", loaded.quantizer, &*loaded.ema);
  EXPECT_EQ(io::read_file_bytes(dir / "a.brqc"), io::read_file_bytes(dir / "b.brqc"));
  EXPECT_FALSE(fs::exists(dir / "a.brqc.tmp"));
}

TEST(Archive, CorruptInputsAreFormatErrors) {
  const ResidualQuantizer rq = random_rq(2, 4, 3, 6);
  const auto ema = random_ema(rq, 7);
  const auto good = io::encode_archive(rq, &ema);
  auto expect_format = [](const std::vector<unsigned char>& bytes) {
    try {
      io::decode_archive(bytes);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::format);
    }
  };
  auto magic = good;
  magic[0] = 'X';
  expect_format(magic);
  auto version = good;
  version[4] = 2;
  expect_format(version);
  expect_format({good.begin(), good.end() - 1});
  expect_format({good.begin(), good.begin() + 10});
  auto extra = good;
  extra.push_back(0);
  expect_format(extra);
}

TEST(Features, TextBlockBecomesMatrix) {
  const Dataset d = io::parse_text_features("1,2,3\n4,5,6\n");
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.sequences[0], (Matrix{{1, 2, 3}, {4, 5, 6}}));
}

TEST(Features, HeaderBlankLinesAndSeparators) {
  const Dataset d = io::parse_text_features("a b c\n1 2 3\n\n\n4\t5\t6\n7;8;9\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.sequences[0], (Matrix{{1, 2, 3}}));
  EXPECT_EQ(d.sequences[1], (Matrix{{4, 5, 6}, {7, 8, 9}}));
}

TEST(Features, NanRowIsCited) {
  try {
    io::parse_text_features("f1,f2\n1,2\n3,nan\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::parse_text_features("1,2\ninf,2\n"), Error);
}

TEST(Features, RaggedAndMalformedRowsRejected) {
  EXPECT_THROW(io::parse_text_features("1,2,3\n4,5\n"), Error);
  EXPECT_THROW(io::parse_text_features("1,2\n3,x\n"), Error);
  EXPECT_THROW(io::parse_text_features("\n\n"), Error);
}

TEST(Features, RawMatchesTextRendering) {
  SyntheticDatasetSpec spec;
  spec.n_samples = 3;
  spec.seq_len = 4;
  spec.feature_dim = 5;
  Dataset d = gen_synthetic(spec);
  for (auto& m : d.sequences)
    for (double& v : m.flat()) v = static_cast<double>(static_cast<float>(v));
  const auto raw = io::format_raw_float32(d);
  EXPECT_EQ(raw.size(), 3u * 4 * 5 * 4);
  const Dataset from_raw = io::parse_raw_float32(raw, 4, 5);
  const Dataset from_text = io::parse_text_features(io::format_text_features(d));
  EXPECT_EQ(from_raw.sequences, from_text.sequences);
  EXPECT_EQ(from_raw.sequences, d.sequences);
  EXPECT_THROW(io::parse_raw_float32({raw.begin(), raw.end() - 4}, 4, 5), Error);
  EXPECT_THROW(io::parse_raw_float32({}, 4, 5), Error);
}

TEST(Features, RawRejectsNonFinite) {
  std::vector<unsigned char> raw(2 * 2 * 4, 0);
  const auto bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int b = 0; b < 4; ++b) raw[12 + b] = static_cast<unsigned char>(bits >> (8 * b));
  try {
    io::parse_raw_float32(raw, 2, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Features, TextRoundTripIsExact) {
  SyntheticDatasetSpec spec;
  spec.n_samples = 2;
  const Dataset d = gen_synthetic(spec);
  EXPECT_EQ(io::parse_text_features(io::format_text_features(d)).sequences, d.sequences);
}

TEST(TokenGrids, CsvRoundTrip) {
  std::mt19937_64 rng(3);
  std::vector<TokenGrid> grids;
  for (int s = 0; s < 3; ++s) {
    TokenGrid g(2 + s, 4);
    for (std::size_t t = 0; t < g.positions(); ++t)
      for (std::size_t m = 0; m < 4; ++m) g(t, m) = static_cast<int>(rng() % 16);
    grids.push_back(g);
  }
  const std::string csv = io::format_token_grids(grids);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sequence,position,stage_1,stage_2,stage_3,stage_4");
  EXPECT_EQ(io::parse_token_grids(csv), grids);
  EXPECT_THROW(io::parse_token_grids("sequence,position,stage_1\n0,1,3\n"), Error);
  EXPECT_THROW(io::parse_token_grids("sequence,position,stage_1\n0,0,-1\n"), Error);
}

TEST(Reports, SerializeAllKinds) {
  const ConvergenceReport c = convergence_experiment(2, 2, 0.9, 1e-3, 10, 1);
  const io::Json j = io::to_json(c);
  EXPECT_EQ(j["steps"], 10);
  EXPECT_EQ(j["max_code_deviation"].get<double>(), c.max_code_deviation);
  const MetricsReport m = metrics_report({UsageStats::from_counts(1, {1, 1})});
  EXPECT_EQ(io::to_json(m)["stages"][0]["ecu"], 1.0);
  RunReport r;
  r.config.seed = 12;
  const io::Json rj = io::to_json(r);
  EXPECT_EQ(rj["seed"], 12);
  EXPECT_EQ(io::config_from_json(rj["config"]), r.config);
}
