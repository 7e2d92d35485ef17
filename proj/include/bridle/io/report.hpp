#pragma once

#include <string>

#include "bridle/harness/convergence.hpp"
#include "bridle/harness/experiments.hpp"
#include "bridle/harness/training.hpp"
#include "bridle/io/config_io.hpp"
#include "bridle/losses.hpp"
#include "bridle/metrics.hpp"

namespace bridle::io {

inline Json to_json(const StageMetrics& s) {
  return Json{{"stage", s.stage_index}, {"codebook_size", s.codebook_size},
              {"cur", s.cur},           {"ue", s.ue},
              {"ecu", s.ecu}};
}

inline Json to_json(const MetricsReport& r) {
  Json stages = Json::array();
  for (const auto& s : r.stages) stages.push_back(to_json(s));
  return Json{{"provenance", to_string(r.provenance)}, {"stages", stages}};
}

inline Json to_json(const LossReport& l) {
  return Json{{"encoder", l.encoder_loss}, {"cb", l.cb_loss},           {"cos", l.cos_loss},
              {"tokenizer", l.tokenizer_loss}, {"joint", l.joint_loss}, {"beta", l.beta},
              {"lambda_cos", l.lambda_cos},    {"alpha", l.alpha}};
}

inline Json to_json(const PhaseLog& p) {
  Json epochs = Json::array();
  for (const auto& e : p.epochs)
    epochs.push_back(Json{{"epoch", e.epoch},
                          {"losses", to_json(e.losses)},
                          {"tokenizer_updates", e.tokenizer_updates}});
  Json j{{"kind", to_string(p.kind)},
         {"iteration", p.iteration},
         {"codes_reset", p.codes_reset},
         {"epochs", epochs}};
  j["pre_metrics"] = p.pre_metrics ? to_json(*p.pre_metrics) : Json();
  j["post_metrics"] = p.post_metrics ? to_json(*p.post_metrics) : Json();
  return j;
}

inline Json to_json(const Evaluation& e) {
  return Json{{"iteration", e.iteration},
              {"accuracy", e.accuracy},
              {"stage_accuracy", e.stage_accuracy},
              {"mse", e.mse},
              {"metrics", to_json(e.metrics)}};
}

inline Json to_json(const RunReport& r) {
  Json phases = Json::array();
  for (const auto& p : r.phases) phases.push_back(to_json(p));
  Json evals = Json::array();
  for (const auto& e : r.evaluations) evals.push_back(to_json(e));
  return Json{{"seed", r.config.seed},
              {"config", config_to_json(r.config)},
              {"chance", r.chance},
              {"final_accuracy", r.final_accuracy},
              {"evaluations", evals},
              {"phases", phases}};
}

inline Json to_json(const ArmSummary& a) {
  return Json{{"mse", a.mse},           {"accuracy", a.accuracy}, {"chance", a.chance},
              {"mean_cur", a.mean_cur()}, {"min_cur", a.min_cur()}, {"metrics", to_json(a.metrics)}};
}

inline Json to_json(const ComparisonReport& r) {
  Json runs = Json::array();
  for (const auto& p : r.runs)
    runs.push_back(Json{{"seed", p.seed}, {"vq", to_json(p.vq)}, {"rq", to_json(p.rq)}});
  return Json{{"vq_config", config_to_json(r.vq_config)},
              {"rq_config", config_to_json(r.rq_config)},
              {"seeds", r.runs.size()},
              {"rq_lower_mse", r.rq_lower_mse},
              {"rq_cur_at_least", r.rq_cur_at_least},
              {"rq_wins_both", r.rq_wins_both},
              {"runs", runs}};
}

inline Json to_json(const ConvergenceReport& r) {
  return Json{{"K", r.K},
              {"D", r.D},
              {"S", r.S},
              {"gamma", r.gamma},
              {"epsilon", r.epsilon},
              {"steps", r.steps},
              {"max_count_deviation", r.max_count_deviation},
              {"max_code_deviation", r.max_code_deviation},
              {"initial_count_deviation", r.initial_count_deviation},
              {"initial_code_deviation", r.initial_code_deviation},
              {"geometric_constant", r.geometric_constant},
              {"code_deviations", r.code_deviations},
              {"embed_bound", r.embed_bound},
              {"count_bound", r.count_bound},
              {"bound_checks", r.bound_checks}};
}

template <typename Report>
std::string format_report(const Report& r) {
  return to_json(r).dump(2) + "\n";
}

}  // namespace bridle::io
