#include <gtest/gtest.h>

#include <random>

#include "bridle/bridle.hpp"
#include "oracles.hpp"

using namespace bridle;

namespace {

// Small, fast configuration for protocol tests.
RunConfig small_config(std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.dataset.seed = seed;
  cfg.dataset.n_samples = 48;
  cfg.dataset.seq_len = 16;
  cfg.eval_samples = 16;
  cfg.schedule.encoder_epochs = 4;
  cfg.schedule.tokenizer_epochs = 3;
  cfg.schedule.batch_size = 8;
  return cfg;
}

double pipeline_loss(const ToyEncoder& enc, const ToyDecoder& dec, const Matrix& x,
                     const TokenGrid& y, const std::vector<bool>& mask) {
  TokenPredictions p;
  for (const auto& l : decoder_forward(dec, encoder_forward(enc, x, mask))) p.probs.push_back(softmax_rows(l));
  return masked_cross_entropy({y, mask}, p).loss;
}

}  // namespace

TEST(ToyEncoder, LocalWithoutContextWeights) {
  ToyEncoder enc = ToyEncoder::random(3, 4, 1);
  std::fill(enc.w_ctx.flat().begin(), enc.w_ctx.flat().end(), 0.0);
  std::mt19937_64 rng(2);
  Matrix x = oracle::random_matrix(5, 4, rng);
  const Matrix z = encoder_forward(enc, x, {});
  x(3, 1) += 10.0;
  const Matrix z2 = encoder_forward(enc, x, {});
  for (std::size_t t = 0; t < 5; ++t) {
    if (t == 3) continue;
    EXPECT_EQ(z.row_vector(t), z2.row_vector(t));
  }
  EXPECT_NE(z.row_vector(3), z2.row_vector(3));
}

TEST(ToyEncoder, MaskedFramesUseMaskVector) {
  ToyEncoder enc = ToyEncoder::random(2, 3, 4);
  enc.mask_vector = {0.5, -1.0, 2.0};
  std::mt19937_64 rng(3);
  const Matrix x = oracle::random_matrix(4, 3, rng);
  const std::vector<bool> mask{true, true, false, true};
  EncoderCache cache;
  encoder_forward(enc, x, mask, &cache);
  for (std::size_t f = 0; f < 3; ++f)
    EXPECT_NEAR(cache.context[f], (3 * enc.mask_vector[f] + x(2, f)) / 4.0, 1e-15);
}

TEST(ToyModels, PipelineGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t T = 3 + rng() % 5, F = 1 + rng() % 4, D = 1 + rng() % 4;
    const std::vector<std::size_t> ks{2 + rng() % 4, 2 + rng() % 4};
    ToyEncoder enc = ToyEncoder::random(D, F, rng());
    for (double& v : enc.bias) v = 0.1 * static_cast<double>(rng() % 7);
    for (double& v : enc.mask_vector) v = 0.2 * static_cast<double>(rng() % 5) - 0.4;
    ToyDecoder dec = ToyDecoder::random(ks, D, rng());
    for (auto& h : dec.heads) for (double& v : h.flat()) v *= 10.0;
    const Matrix x = oracle::random_matrix(T, F, rng);
    const std::vector<bool> mask = sample_mask(T, 0.5, rng());
    TokenGrid y(T, 2);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t m = 0; m < 2; ++m) y(t, m) = static_cast<int>(rng() % ks[m]);

    ToyEncoder genc = zeros_like(enc);
    ToyDecoder gdec = zeros_like(dec);
    EncoderCache cache;
    const Matrix z = encoder_forward(enc, x, mask, &cache);
    const auto logits = decoder_forward(dec, z);
    TokenPredictions p;
    for (const auto& l : logits) p.probs.push_back(softmax_rows(l));
    const CrossEntropyResult ce = masked_cross_entropy({y, mask}, p);
    encoder_backward(enc, cache, decoder_backward(dec, z, ce.grad_logits, gdec), genc);

    auto loss = [&] { return pipeline_loss(enc, dec, x, y, mask); };
    auto ep = enc.parameters();
    const auto eg = std::as_const(genc).parameters();
    for (std::size_t i = 0; i < ep.size(); ++i)
      EXPECT_LT(oracle::relative_error(eg[i], oracle::numeric_gradient(ep[i], loss)), 1e-5) << "encoder block " << i;
    auto dp = dec.parameters();
    const auto dg = std::as_const(gdec).parameters();
    for (std::size_t i = 0; i < dp.size(); ++i)
      EXPECT_LT(oracle::relative_error(dg[i], oracle::numeric_gradient(dp[i], loss)), 1e-5) << "decoder block " << i;
  }
}

TEST(AffineMap, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  AffineMap a = AffineMap::random(3, 4, 1.0, 7);
  Matrix x = oracle::random_matrix(5, 4, rng);
  const Matrix w = oracle::random_matrix(5, 3, rng);
  auto loss = [&] {
    const Matrix y = affine_forward(a, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.flat().size(); ++i) s += w.flat()[i] * y.flat()[i] * y.flat()[i];
    return s;
  };
  const Matrix y = affine_forward(a, x);
  Matrix dy(5, 3);
  for (std::size_t i = 0; i < dy.flat().size(); ++i) dy.flat()[i] = 2.0 * w.flat()[i] * y.flat()[i];
  AffineMap g = zeros_like(a);
  const Matrix dx = affine_backward(a, x, dy, g);
  EXPECT_LT(oracle::relative_error(g.weight.flat(), oracle::numeric_gradient(a.weight.flat(), loss)), 1e-5);
  EXPECT_LT(oracle::relative_error(g.bias, oracle::numeric_gradient(a.bias, loss)), 1e-5);
  EXPECT_LT(oracle::relative_error(dx.flat(), oracle::numeric_gradient(x.flat(), loss)), 1e-5);
}

// Tokens are frozen at the current parameters; the straight-through path
// is the surrogate q~ = e_1(theta) + (q - e_1(theta_0)).
TEST(TokenizerGradient, StraightThroughMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    QuantizerConfig qc;
    qc.dim = 2 + rng() % 3;
    qc.num_codebooks = 1 + rng() % 3;
    qc.codebook_size = 4;
    qc.normalization = trial % 2 ? Normalization::none : Normalization::input_only;
    const std::size_t F = 3, T = 6;
    Tokenizer tok = fresh_tokenizer(qc, F, rng(), false);
    const Matrix x = oracle::random_matrix(T, F, rng);
    initialize_codebooks(tok, oracle::random_matrix(40, F, rng), qc, rng());
    const Matrix teacher = oracle::random_matrix(T, qc.dim, rng);
    LossWeights w;
    w.beta = 0.25;
    w.lambda_cos = 0.7;

    const TokenizerOutput out = tokenize(tok, x);
    TokenizerGrad grad = TokenizerGrad::zeros(tok);
    tokenizer_loss_and_grad(tok, x, out, teacher, w, 1.0, grad);

    Matrix offset = out.quant.quantized;  // q - e_1 at theta_0
    axpy(-1.0, out.quant.residuals[0].flat(), offset.flat());
    auto e1_of = [&] {
      Matrix e = tokenizer_latents(tok, x);
      if (qc.normalization != Normalization::none)
        for (std::size_t t = 0; t < T; ++t) normalize_in_place(e.row(t));
      return e;
    };
    auto surrogate = [&] {
      const Matrix e1 = e1_of();
      Matrix q_st = e1;
      axpy(1.0, offset.flat(), q_st.flat());
      double commit = 0.0;
      for (std::size_t t = 0; t < T; ++t) commit += w.beta * squared_distance(e1.row(t), out.quant.quantized.row(t));
      commit /= static_cast<double>(T);
      return commit + w.lambda_cos * cosine_alignment_loss(affine_forward(tok.estimator.map, q_st), teacher).loss;
    };
    auto params = tok.encoder.parameters();
    const auto grads = std::as_const(grad.encoder).parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
      EXPECT_LT(oracle::relative_error(grads[i], oracle::numeric_gradient(params[i], surrogate)), 1e-5);

    auto est_loss = [&] {
      return w.lambda_cos * cosine_alignment_loss(affine_forward(tok.estimator.map, out.quant.quantized), teacher).loss;
    };
    auto ep = tok.estimator.parameters();
    const auto eg = std::as_const(grad.estimator).parameters();
    for (std::size_t i = 0; i < ep.size(); ++i)
      EXPECT_LT(oracle::relative_error(eg[i], oracle::numeric_gradient(ep[i], est_loss)), 1e-5);
  }
}

TEST(SyntheticData, SeededAndNoiseFree) {
  SyntheticDatasetSpec spec;
  spec.n_samples = 5;
  const Dataset a = gen_synthetic(spec), b = gen_synthetic(spec);
  EXPECT_EQ(a.sequences, b.sequences);
  EXPECT_EQ(a.coarse_labels, b.coarse_labels);
  spec.noise_sigma = 0.0;
  const Dataset c = gen_synthetic(spec);
  const SyntheticWorld w = synthetic_world(spec);
  for (std::size_t n = 0; n < c.size(); ++n)
    for (std::size_t t = 0; t < spec.seq_len; ++t)
      for (std::size_t f = 0; f < spec.feature_dim; ++f)
        EXPECT_EQ(c.sequences[n](t, f),
                  w.coarse(static_cast<std::size_t>(c.coarse_labels[n][t]), f) +
                      w.fine(static_cast<std::size_t>(c.fine_labels[n][t]), f));
}

TEST(SyntheticData, FirstStageRecoversCoarseLabels) {
  SyntheticDatasetSpec spec;
  spec.n_samples = 40;
  spec.seed = 3;
  const Dataset ds = gen_synthetic(spec);
  const Matrix frames = ds.stacked();
  const ResidualQuantizer rq = fit_rq_init(frames, {{4, 4}, spec.feature_dim, Normalization::none, 1},
                                           InitMode::kmeans, 2, 20);
  const QuantizationResult r = quantize(frames, rq);
  std::vector<int> tokens, labels;
  for (std::size_t n = 0; n < ds.size(); ++n)
    for (std::size_t t = 0; t < spec.seq_len; ++t) {
      tokens.push_back(r.tokens(n * spec.seq_len + t, 0));
      labels.push_back(ds.coarse_labels[n][t]);
    }
  EXPECT_GT(oracle::permutation_agreement(tokens, labels, 4), 0.95);
}

TEST(SampleMask, ExactCountAndSeeded) {
  const auto m = sample_mask(10, 0.8, 4);
  EXPECT_EQ(std::count(m.begin(), m.end(), true), 8);
  EXPECT_EQ(m, sample_mask(10, 0.8, 4));
  for (double r : {0.01, 0.5, 0.99}) {
    const auto k = sample_mask(7, r, 1);
    const auto c = std::count(k.begin(), k.end(), true);
    EXPECT_GE(c, 1);
    EXPECT_LE(c, 6);
  }
  EXPECT_THROW(sample_mask(1, 0.5, 0), Error);
}

TEST(EncoderPhase, ZeroEpochsLeavesParametersUntouched) {
  RunConfig cfg = small_config();
  cfg.schedule.encoder_epochs = 0;
  const SplitDataset data = make_datasets(cfg);
  const Tokenizer tok = cold_start_tokenizer(data.train, cfg);
  ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  ToyDecoder dec = ToyDecoder::random(stage_sizes(cfg.quantizer), cfg.quantizer.dim, 4);
  const auto before = parameter_bytes(enc), dbefore = parameter_bytes(dec);
  train_encoder_phase(data.train, tok, enc, dec, cfg, 5, 1);
  EXPECT_EQ(parameter_bytes(enc), before);
  EXPECT_EQ(parameter_bytes(dec), dbefore);
}

TEST(EncoderPhase, TokenizerStaysFrozen) {
  const RunConfig cfg = small_config();
  const SplitDataset data = make_datasets(cfg);
  const Tokenizer tok = cold_start_tokenizer(data.train, cfg);
  const auto tok_before = tokenizer_bytes(tok);
  const TokenGrid grid_before = tokenize(tok, data.train.sequences[0]).quant.tokens;
  ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  ToyDecoder dec = ToyDecoder::random(stage_sizes(cfg.quantizer), cfg.quantizer.dim, 4);
  train_encoder_phase(data.train, tok, enc, dec, cfg, 5, 1);
  EXPECT_EQ(tokenizer_bytes(tok), tok_before);
  EXPECT_EQ(tokenize(tok, data.train.sequences[0]).quant.tokens, grid_before);
}

TEST(EncoderPhase, BeatsChanceAfterTraining) {
  RunConfig cfg;
  cfg.schedule.iterations = 1;
  const RunResult r = run(cfg);
  EXPECT_GT(r.report.final_accuracy, r.report.chance + 0.1);
}

TEST(TokenizerPhase, ZeroLearningRateStillMovesCodebooks) {
  RunConfig cfg = small_config();
  cfg.schedule.tokenizer_lr = 0.0;
  const SplitDataset data = make_datasets(cfg);
  const ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  Tokenizer tok = fresh_tokenizer(cfg.quantizer, data.train.feature_dim(), 9, false);
  const auto enc_before = parameter_bytes(tok.encoder), est_before = parameter_bytes(tok.estimator);
  // initialize once up front so codebooks can be compared after the phase
  std::vector<std::size_t> first{0, 1, 2, 3, 4, 5, 6, 7};
  initialize_codebooks(tok, detail::stack_frames(data.train, first), cfg.quantizer, 1);
  const ResidualQuantizer rq_before = tok.rq();
  train_tokenizer_phase(data.train, data.eval, enc, tok, cfg, 5, 2);
  EXPECT_EQ(parameter_bytes(tok.encoder), enc_before);
  EXPECT_EQ(parameter_bytes(tok.estimator), est_before);
  EXPECT_NE(tok.rq(), rq_before);
}

TEST(TokenizerPhase, CosineLossDecreases) {
  RunConfig cfg = small_config();
  cfg.schedule.tokenizer_epochs = 8;
  const SplitDataset data = make_datasets(cfg);
  const ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  Tokenizer tok = fresh_tokenizer(cfg.quantizer, data.train.feature_dim(), 9, false);
  const PhaseLog log = train_tokenizer_phase(data.train, data.eval, enc, tok, cfg, 5, 2);
  ASSERT_EQ(log.epochs.size(), 8u);
  EXPECT_LT(log.epochs.back().losses.cos_loss, log.epochs.front().losses.cos_loss);
  ASSERT_TRUE(log.pre_metrics && log.post_metrics);
  EXPECT_EQ(log.pre_metrics->provenance, Provenance::pre_training);
}

TEST(TokenizerPhase, ColdStartTokenizerIsNotTrained) {
  const RunConfig cfg = small_config();
  const SplitDataset data = make_datasets(cfg);
  Tokenizer tok = cold_start_tokenizer(data.train, cfg);
  const ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  EXPECT_THROW(train_tokenizer_phase(data.train, data.eval, enc, tok, cfg, 5, 2), Error);
}

TEST(TokenizerPhase, FirstBatchResetFiresIffCodesUnused) {
  RunConfig cfg = small_config();
  cfg.quantizer.num_codebooks = 1;
  const SplitDataset data = make_datasets(cfg);
  const ToyEncoder enc = ToyEncoder::random(cfg.quantizer.dim, data.train.feature_dim(), 3);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  for (bool add_dead_code : {false, true}) {
    Tokenizer tok = fresh_tokenizer(cfg.quantizer, data.train.feature_dim(), 9, false);
    initialize_codebooks(tok, detail::stack_frames(data.train, batch), cfg.quantizer, 1);
    if (add_dead_code) {
      Codebook& cb = tok.quantizer->stage(0);
      std::fill(cb.vectors.row(3).begin(), cb.vectors.row(3).end(), 1e3);
    }
    std::size_t unused = 0;
    TokenGrid all;
    for (std::size_t i : batch) all.append(tokenize(tok, data.train.sequences[i]).quant.tokens);
    const auto usage = usage_histogram(all, tok.rq());
    for (double c : usage[0].counts) unused += c < 1.0;
    const auto r = detail::tokenizer_batch(data.train, batch, enc, tok, cfg, 1.0, 0.1, true, 7);
    EXPECT_EQ(r.codes_reset, unused);
    EXPECT_EQ(r.codes_reset > 0, add_dead_code);
  }
}

TEST(Interleave, PhaseSequence) {
  RunConfig cfg = small_config();
  cfg.schedule.iterations = 1;
  RunResult r = run(cfg);
  ASSERT_EQ(r.report.phases.size(), 1u);
  EXPECT_EQ(r.report.phases[0].kind, PhaseKind::encoder);
  EXPECT_EQ(r.report.evaluations.size(), 1u);

  cfg.schedule.iterations = 2;
  r = run(cfg);
  ASSERT_EQ(r.report.phases.size(), 3u);
  EXPECT_EQ(r.report.phases[0].kind, PhaseKind::encoder);
  EXPECT_EQ(r.report.phases[1].kind, PhaseKind::tokenizer);
  EXPECT_EQ(r.report.phases[2].kind, PhaseKind::encoder);
  EXPECT_EQ(r.report.evaluations.size(), 2u);
  EXPECT_TRUE(r.tokenizer.initialized());
  EXPECT_FALSE(r.tokenizer.encoder.cold_start);
}

TEST(JointTrain, NoCadenceFreezesTokenizer) {
  RunConfig cfg = small_config();
  cfg.schedule.joint_mode = true;
  cfg.schedule.tokenizer_update_every = 0;
  const SplitDataset data = make_datasets(cfg);
  const RunResult r = run(cfg, data);

  // rebuild the tokenizer the run started from
  const std::uint64_t seed = derive_seed(cfg.seed, 2000);
  Tokenizer ref = fresh_tokenizer(cfg.quantizer, data.train.feature_dim(),
                                  derive_seed(seed, detail::kTagTokenizer), false);
  const auto first = detail::batches(detail::epoch_order(data.train.size(), seed, 0), cfg.schedule.batch_size)[0];
  initialize_codebooks(ref, detail::stack_frames(data.train, first), cfg.quantizer,
                       derive_seed(seed, detail::kTagCodebookInit));
  EXPECT_EQ(tokenizer_bytes(r.tokenizer), tokenizer_bytes(ref));
  for (const auto& e : r.report.phases[0].epochs) EXPECT_EQ(e.tokenizer_updates, 0u);
}

TEST(JointTrain, ZeroAlphaKeepsGradientsOutButEmaRuns) {
  RunConfig cfg = small_config();
  cfg.schedule.joint_mode = true;
  cfg.losses.alpha = 0.0;
  const SplitDataset data = make_datasets(cfg);
  const RunResult r = run(cfg, data);
  const std::uint64_t seed = derive_seed(cfg.seed, 2000);
  const Tokenizer ref = fresh_tokenizer(cfg.quantizer, data.train.feature_dim(),
                                        derive_seed(seed, detail::kTagTokenizer), false);
  EXPECT_EQ(parameter_bytes(r.tokenizer.encoder), parameter_bytes(ref.encoder));
  EXPECT_EQ(parameter_bytes(r.tokenizer.estimator), parameter_bytes(ref.estimator));
  ASSERT_EQ(r.tokenizer.ema.size(), cfg.quantizer.num_codebooks);
  EXPECT_GT(r.tokenizer.ema[0].step, 0);
  std::size_t updates = 0;
  for (const auto& e : r.report.phases[0].epochs) updates += e.tokenizer_updates;
  // 48 sequences / batch 8 = 6 batches per epoch, every 5th batch updates
  const int epochs = cfg.schedule.iterations * cfg.schedule.encoder_epochs;
  EXPECT_EQ(updates, static_cast<std::size_t>(6 * epochs / 5));
}

TEST(Run, BitReproducible) {
  for (bool joint : {false, true}) {
    RunConfig cfg = small_config(4);
    cfg.schedule.joint_mode = joint;
    const RunResult a = run(cfg), b = run(cfg);
    EXPECT_EQ(io::format_report(a.report), io::format_report(b.report));
    EXPECT_EQ(tokenizer_bytes(a.tokenizer), tokenizer_bytes(b.tokenizer));
    EXPECT_EQ(parameter_bytes(a.encoder), parameter_bytes(b.encoder));
  }
}

TEST(Run, InvalidConfigIsRejected) {
  RunConfig cfg = small_config();
  cfg.quantizer.gamma = 1.0;
  try {
    run(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.key(), "gamma");
  }
}

TEST(Convergence, ReachesClosedFormLimit) {
  const ConvergenceReport r = convergence_experiment(16, 8, 0.99, 1e-5, 5000, 1);
  EXPECT_LT(r.max_count_deviation, 1e-8);
  EXPECT_LT(r.max_code_deviation, 1e-8);
  EXPECT_EQ(r.bound_checks, 2L * 16 * 5000);
  EXPECT_EQ(r.code_deviations.size(), 16u);
}

TEST(Convergence, ZeroStepsReportsInitialGap) {
  const ConvergenceReport r = convergence_experiment(4, 3, 0.9, 1e-3, 0, 2);
  EXPECT_EQ(r.max_count_deviation, r.initial_count_deviation);
  EXPECT_EQ(r.max_code_deviation, r.initial_code_deviation);
  // direct evaluation of the initial gap
  const Codebook c0 = init_uniform(4, 3, derive_seed(2, 1));
  double gap = 0.0;
  for (std::size_t i = 0; i < 4; ++i) gap = std::max(gap, std::sqrt(squared_distance(c0.code(i), r.limit.c_inf.row(i))));
  EXPECT_EQ(r.max_code_deviation, gap);
  double count_gap = 0.0;
  for (double n : r.limit.N_inf) count_gap = std::max(count_gap, n);
  EXPECT_EQ(r.max_count_deviation, count_gap);
}

TEST(Convergence, SymmetricStreamGivesEqualDeviations) {
  // every code sees a 90-degree rotation of code 0's latents and start point
  const Matrix base{{0.7, -0.2}, {1.5, 0.4}};
  auto rot = [](std::span<const double> v, int k) {
    Vector r(v.begin(), v.end());
    for (int i = 0; i < k; ++i) r = {-r[1], r[0]};
    return r;
  };
  ConstantStream s;
  Matrix c0(4, 2);
  const Vector start{0.3, 0.9};
  for (int k = 0; k < 4; ++k) {
    for (std::size_t j = 0; j < base.rows(); ++j) {
      s.latents.append_row(rot(base.row(j), k));
      s.codes.push_back(k);
    }
    const Vector c = rot(start, k);
    std::copy(c.begin(), c.end(), c0.row(static_cast<std::size_t>(k)).begin());
  }
  const ConvergenceReport r = convergence_experiment(Codebook(1, c0), s, 0.95, 1e-3, 40);
  for (double d : r.code_deviations) EXPECT_DOUBLE_EQ(d, r.code_deviations[0]);
  EXPECT_GT(r.code_deviations[0], 0.0);
}

TEST(Convergence, ChecksBothBoundsEveryStep) {
  ConstantStream s{Matrix{{1, 0}}, {3}};
  EXPECT_THROW(convergence_experiment(Codebook(1, Matrix{{0, 0}}), s, 0.9, 1e-3, 5), Error);
  const ConvergenceReport ok = convergence_experiment(Codebook(1, Matrix{{0, 0}}), ConstantStream{Matrix{{1, 0}}, {0}}, 0.9, 1e-3, 50);
  EXPECT_EQ(ok.bound_checks, 100);
}

TEST(Experiments, ComparisonIsDeterministic) {
  RunConfig cfg = small_config();
  cfg.schedule.iterations = 1;
  const std::vector<std::uint64_t> seeds{1, 2};
  const ComparisonReport a = vq_vs_rq_experiment(cfg, seeds);
  const ComparisonReport b = vq_vs_rq_experiment(cfg, seeds);
  EXPECT_EQ(io::format_report(a), io::format_report(b));
  EXPECT_EQ(a.vq_config.quantizer.codebook_size, 64u);
  EXPECT_EQ(a.vq_config.quantizer.num_codebooks, 1u);
  EXPECT_EQ(a.runs.size(), 2u);
}
