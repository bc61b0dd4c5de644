// qrisk: query-side hallucination risk scoring pipeline.
//
//   qrisk extract|perturb|answer|score|fit|diagnose --config cfg.json [--workdir DIR]
//   qrisk triage --model model.json --text "..." --scenario Abstractive
//   qrisk sweep --labeled labeled.jsonl --grid-step 0.1 --out sweep.csv
//
// Exit codes: 0 success, 2 validation error, 3 provider error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "qrisk/errors.hpp"
#include "qrisk/mockmodel.hpp"
#include "qrisk/pipeline.hpp"
#include "qrisk/proxy.hpp"
#include "qrisk/synth.hpp"

using namespace qrisk;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string workdir;
  std::string corpus;
  std::string cache_dir;
  int64_t seed = -1;
  std::string paraphraser, answerer, judge, bi_encoder, cross_encoder;
  bool record = false;
  bool replay_strict = false;
  bool strict_resume = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "pipeline config (JSON)");
  cmd->add_option("--workdir", f.workdir, "working directory for stage artifacts");
  cmd->add_option("--corpus", f.corpus, "corpus JSONL (overrides config)");
  cmd->add_option("--seed", f.seed, "global seed (overrides config)");
  cmd->add_option("--cache-dir", f.cache_dir, "transcript cache directory");
  cmd->add_option("--paraphraser", f.paraphraser, "mock or an HTTP endpoint URL");
  cmd->add_option("--answerer", f.answerer, "mock or an HTTP endpoint URL");
  cmd->add_option("--judge", f.judge, "mock or an HTTP endpoint URL");
  cmd->add_option("--bi-encoder", f.bi_encoder, "mock or an HTTP endpoint URL");
  cmd->add_option("--cross-encoder", f.cross_encoder, "mock or an HTTP endpoint URL");
  cmd->add_flag("--record", f.record, "record provider responses into the cache");
  cmd->add_flag("--replay-strict", f.replay_strict,
                "serve everything from the cache; uncached calls error");
  cmd->add_flag("--strict-resume", f.strict_resume,
                "error on stale artifacts instead of recomputing");
}

PipelineConfig build_config(const CommonFlags& f) {
  PipelineConfig cfg;
  if (!f.config_path.empty()) cfg = load_pipeline_config(f.config_path);
  if (!f.workdir.empty()) cfg.workdir = f.workdir;
  if (!f.corpus.empty()) cfg.corpus_path = f.corpus;
  if (!f.cache_dir.empty()) cfg.cache_dir = f.cache_dir;
  if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
  if (!f.paraphraser.empty()) apply_provider_flag(cfg.paraphraser, f.paraphraser);
  if (!f.answerer.empty()) apply_provider_flag(cfg.answerer, f.answerer);
  if (!f.judge.empty()) apply_provider_flag(cfg.judge, f.judge);
  if (!f.bi_encoder.empty()) apply_provider_flag(cfg.bi_encoder, f.bi_encoder);
  if (!f.cross_encoder.empty()) apply_provider_flag(cfg.cross_encoder, f.cross_encoder);
  if (f.replay_strict) cfg.cache_mode = CacheMode::ReplayStrict;
  else if (f.record) cfg.cache_mode = CacheMode::Record;
  cfg.strict_resume = f.strict_resume;
  return cfg;
}

int run_one_stage(Stage stage, const CommonFlags& flags) {
  PipelineConfig cfg = build_config(flags);
  StageResult r = run_stage(stage, cfg);
  std::printf("%s %s -> %s (%s)\n", r.skipped ? "skipped" : "wrote", to_string(stage),
              r.artifact.c_str(), r.output_hash.substr(0, 12).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-side hallucination risk scoring"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::map<std::string, Stage> stage_cmds = {
      {"extract", Stage::Extract}, {"perturb", Stage::Perturb}, {"answer", Stage::Answer},
      {"score", Stage::Score},     {"fit", Stage::Fit},         {"diagnose", Stage::Diagnose},
  };
  std::map<std::string, CLI::App*> cmds;
  for (auto& [name, stage] : stage_cmds) {
    CLI::App* c = app.add_subcommand(name, std::string("run the ") + name + " stage");
    add_common(c, flags);
    cmds[name] = c;
  }

  // triage
  std::string triage_model, triage_text, triage_scenario = "Abstractive";
  double triage_threshold = -1.0;
  CLI::App* tri = app.add_subcommand("triage", "score one query and route it");
  add_common(tri, flags);
  tri->add_option("--model", triage_model, "fitted model JSON");
  tri->add_option("--text", triage_text, "query text")->required();
  tri->add_option("--scenario", triage_scenario, "Extractive|MultipleChoice|Abstractive");
  tri->add_option("--threshold", triage_threshold, "route direct below this P(Risky)");

  // sweep
  std::string sweep_labeled, sweep_out = "sweep.csv";
  double sweep_step = 0.1;
  CLI::App* swp = app.add_subcommand("sweep", "reward-weight simplex sweep (ROC-AUC)");
  swp->add_option("--labeled", sweep_labeled,
                  "JSONL with {s_llm, s_fuzz, s_bleu, label} per line")
      ->required();
  swp->add_option("--grid-step", sweep_step, "simplex grid step (must divide 1)");
  swp->add_option("--out", sweep_out, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& [name, stage] : stage_cmds)
      if (cmds[name]->parsed()) return run_one_stage(stage, flags);

    if (tri->parsed()) {
      PipelineConfig cfg = build_config(flags);
      std::string model_path =
          triage_model.empty() ? cfg.workdir + "/model.json" : triage_model;
      OrdinalModel model = load_model(model_path);
      double threshold = triage_threshold >= 0.0 ? triage_threshold : cfg.triage_threshold;

      TriageResult res;
      Scenario scenario = scenario_from_string(triage_scenario);
      if (cfg.detector == "llm") {
        Providers prov = make_providers(cfg);
        LlmJudgeDetector backend(prov.detector, cfg.detector_provider);
        res = triage(triage_text, scenario, model, backend, threshold);
      } else {
        RuleBasedDetector backend;
        res = triage(triage_text, scenario, model, backend, threshold);
      }

      json out;
      out["p_risky"] = res.p_risky;
      out["route"] = to_string(res.route);
      json fired = json::array();
      for (FeatureName f : binary_feature_names())
        if (res.features.binary_at(f)) fired.push_back(to_string(f));
      out["fired_features"] = std::move(fired);
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (swp->parsed()) {
      std::ifstream in(sweep_labeled, std::ios::binary);
      if (!in) throw ValidationError("cannot open labeled file: " + sweep_labeled);
      std::vector<SweepSample> samples;
      std::string line;
      int line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
          j = json::parse(line);
        } catch (const json::exception& e) {
          throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON (" +
                                e.what() + ")");
        }
        SweepSample s;
        s.s_llm = j.at("s_llm").get<double>();
        s.s_fuzz = j.at("s_fuzz").get<double>();
        s.s_bleu = j.at("s_bleu").get<double>();
        s.positive = j.at("label").get<bool>();
        samples.push_back(s);
      }
      auto points = simplex_sweep(samples, sweep_step);
      save_sweep_csv(points, sweep_out);
      std::printf("wrote %zu grid points -> %s (best auc %.4f at %.2g/%.2g/%.2g)\n",
                  points.size(), sweep_out.c_str(), points.front().auc,
                  points.front().weights.w_llm, points.front().weights.w_fuzz,
                  points.front().weights.w_bleu);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ProviderError& e) {
    std::fprintf(stderr, "provider error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
