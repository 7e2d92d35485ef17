// Fits a 4x16 residual quantizer to synthetic frames, tokenizes them and
// prints per-stage codebook usage.

#include <cstdio>

#include "bridle/bridle.hpp"

int main() {
  using namespace bridle;

  SyntheticDatasetSpec spec;
  spec.n_samples = 64;
  const Dataset data = gen_synthetic(spec);
  const Matrix frames = data.stacked();

  const QuantizerShape shape{{16, 16, 16, 16}, spec.feature_dim, Normalization::input_only, 1};
  const ResidualQuantizer rq = fit_rq_init(frames, shape, InitMode::kmeans, /*seed=*/7, 10);

  const QuantizationResult res = quantize(frames, rq);
  std::printf("frames %zu, mse %.5f\n", frames.rows(), quantization_mse(res));
  for (const auto& st : metrics_report(res.tokens, rq).stages)
    std::printf("stage %d: CUR %.3f  UE %.3f  ECU %.3f\n", st.stage_index, st.cur, st.ue, st.ecu);

  const auto bytes = io::encode_archive(rq);
  std::printf("archive %zu bytes\n", bytes.size());
  return 0;
}
