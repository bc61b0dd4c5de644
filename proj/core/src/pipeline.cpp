#include "qrisk/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include "qrisk/errors.hpp"
#include "qrisk/hashing.hpp"
#include "qrisk/mockmodel.hpp"
#include "qrisk/prompts.hpp"

namespace qrisk {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Extract: return "extract";
    case Stage::Perturb: return "perturb";
    case Stage::Answer: return "answer";
    case Stage::Score: return "score";
    case Stage::Fit: return "fit";
    case Stage::Diagnose: return "diagnose";
  }
  return "?";
}

Stage stage_from_string(const std::string& s) {
  for (Stage st : {Stage::Extract, Stage::Perturb, Stage::Answer, Stage::Score, Stage::Fit,
                   Stage::Diagnose})
    if (s == to_string(st)) return st;
  throw ValidationError("unknown stage: \"" + s + "\"");
}

const char* to_string(TriageRoute r) {
  switch (r) {
    case TriageRoute::Direct: return "direct";
    case TriageRoute::Clarify: return "clarify";
    case TriageRoute::Ground: return "ground";
  }
  return "?";
}

// --- config -----------------------------------------------------------------------

namespace {

ProviderConfig provider_from_json(const json& j, const std::string& default_model) {
  ProviderConfig p;
  p.model_name = default_model;
  if (j.is_null()) return p;
  p.kind = j.value("kind", "mock");
  p.base_url = j.value("base_url", "");
  p.api_key_env = j.value("api_key_env", "");
  p.model_name = j.value("model", default_model);
  p.temperature = j.value("temperature", 1.0);
  p.timeout_ms = j.value("timeout_ms", 30000);
  p.max_retries = j.value("max_retries", 3);
  p.rate_limit = j.value("rate_limit", 0.0);
  if (p.kind != "mock" && p.kind != "http")
    throw ValidationError("provider kind must be \"mock\" or \"http\"");
  return p;
}

json provider_to_json(const ProviderConfig& p) {
  json j;
  j["kind"] = p.kind;
  j["base_url"] = p.base_url;
  j["api_key_env"] = p.api_key_env;
  j["model"] = p.model_name;
  j["temperature"] = p.temperature;
  return j;
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed config: " + std::string(e.what()));
  }

  PipelineConfig cfg;
  cfg.corpus_path = j.value("corpus", "");
  cfg.workdir = j.value("workdir", cfg.workdir);
  cfg.seed = j.value("seed", static_cast<uint64_t>(0));
  cfg.detector = j.value("detector", "rule");
  if (cfg.detector != "rule" && cfg.detector != "llm")
    throw ValidationError("detector must be \"rule\" or \"llm\"");

  if (j.contains("similarity")) {
    const auto& s = j.at("similarity");
    cfg.similarity.lambda_bi = s.value("lambda_bi", 0.6);
    cfg.similarity.lambda_cross = s.value("lambda_cross", 0.4);
    cfg.similarity.threshold = s.value("threshold", 0.85);
    cfg.similarity.max_accepted = s.value("max_accepted", 6);
  }
  cfg.similarity.validate();
  cfg.budget_multiplier = j.value("budget_multiplier", 3);

  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    cfg.weights.w_llm = w.value("w_llm", 0.6);
    cfg.weights.w_fuzz = w.value("w_fuzz", 0.3);
    cfg.weights.w_bleu = w.value("w_bleu", 0.1);
  }
  cfg.weights.validate();
  cfg.answers_path = j.value("answers", "");

  cfg.spec = model_spec_from_string(j.value("spec", "Full"));
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    cfg.fit_options.lambda_reg = f.value("lambda_reg", 1e-4);
    cfg.fit_options.max_iters = f.value("max_iters", 10000);
    cfg.fit_options.eval_every = f.value("eval_every", 10);
    cfg.fit_options.patience = f.value("patience", 20);
    cfg.fit_options.lr = f.value("lr", 0.1);
    cfg.fit_options.val_fraction = f.value("val_fraction", 0.10);
  }

  if (j.contains("diagnostics")) {
    const auto& d = j.at("diagnostics");
    cfg.length_bins = d.value("length_bins", 30);
    cfg.length_min_bin = d.value("length_min_bin", 50);
    cfg.reliability_bins = d.value("reliability_bins", 10);
    cfg.propensity.overlap_alpha = d.value("overlap_alpha", 0.05);
    cfg.propensity.report_threshold = d.value("uplift_report_threshold", 0.45);
    cfg.propensity.strata = d.value("strata", 10);
    cfg.uplift_on_model_probability = d.value("uplift_on_model_probability", false);
  }
  cfg.triage_threshold = j.value("triage_threshold", 0.5);

  if (j.contains("providers")) {
    const auto& p = j.at("providers");
    auto get = [&](const char* name, const char* model) {
      return p.contains(name) ? provider_from_json(p.at(name), model)
                              : provider_from_json(json(), model);
    };
    cfg.paraphraser = get("paraphraser", "mock-paraphraser");
    cfg.answerer = get("answerer", "mock-answerer");
    cfg.judge = get("judge", "mock-judge");
    cfg.detector_provider = get("detector", "mock-detector");
    cfg.bi_encoder = get("bi_encoder", "mock-embedder");
    cfg.cross_encoder = get("cross_encoder", "mock-cross");
  } else {
    cfg.paraphraser.model_name = "mock-paraphraser";
    cfg.answerer.model_name = "mock-answerer";
    cfg.judge.model_name = "mock-judge";
    cfg.detector_provider.model_name = "mock-detector";
    cfg.bi_encoder.model_name = "mock-embedder";
    cfg.cross_encoder.model_name = "mock-cross";
  }
  cfg.cache_dir = j.value("cache_dir", "");
  return cfg;
}

void apply_provider_flag(ProviderConfig& cfg, const std::string& value) {
  if (value == "mock") {
    cfg.kind = "mock";
    cfg.base_url.clear();
  } else {
    cfg.kind = "http";
    cfg.base_url = value;
  }
}

Providers make_providers(const PipelineConfig& cfg) {
  Providers p;
  std::string cache = cfg.cache_dir.empty() ? cfg.workdir + "/cache" : cfg.cache_dir;
  p.transcript = std::make_shared<Transcript>(cache);

  auto completion = [&](const ProviderConfig& pc) -> std::shared_ptr<CompletionProvider> {
    std::shared_ptr<CompletionProvider> inner;
    if (pc.kind == "mock")
      inner = std::make_shared<ScriptedCompletion>();
    else
      inner = std::make_shared<HttpCompletionProvider>(pc);
    return std::make_shared<CachedCompletion>(inner, p.transcript, pc, cfg.cache_mode);
  };
  p.paraphraser = completion(cfg.paraphraser);
  p.answerer = completion(cfg.answerer);
  p.judge = completion(cfg.judge);
  p.detector = completion(cfg.detector_provider);

  std::shared_ptr<EmbeddingProvider> bi_inner;
  if (cfg.bi_encoder.kind == "mock")
    bi_inner = std::make_shared<MockEmbedder>();
  else
    bi_inner = std::make_shared<HttpEmbeddingProvider>(cfg.bi_encoder);
  p.bi = std::make_shared<CachedEmbedding>(bi_inner, p.transcript, cfg.bi_encoder,
                                           cfg.cache_mode);

  std::shared_ptr<CrossScorer> cross_inner;
  if (cfg.cross_encoder.kind == "mock")
    cross_inner = std::make_shared<MockCrossScorer>();
  else
    cross_inner = std::make_shared<HttpCrossScorer>(cfg.cross_encoder);
  auto cached_cross = std::make_shared<CachedCrossScorer>(cross_inner, p.transcript,
                                                          cfg.cross_encoder, cfg.cache_mode);
  p.cross = std::make_shared<ClampingCrossScorer>(cached_cross);
  return p;
}

// --- answers artifact -------------------------------------------------------------------

void save_answers(const std::vector<AnswerRecord>& answers, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write answers file: " + path);
  for (const auto& a : answers) {
    json j;
    j["query_id"] = a.query_id;
    j["paraphrase_index"] = a.paraphrase_index;
    j["answer"] = a.answer;
    out << j.dump() << "\n";
  }
}

std::vector<AnswerRecord> load_answers(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open answers file: " + path);
  std::vector<AnswerRecord> out;
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
    AnswerRecord a;
    a.query_id = j.at("query_id").get<std::string>();
    a.paraphrase_index = j.at("paraphrase_index").get<int>();
    a.answer = j.at("answer").get<std::string>();
    out.push_back(std::move(a));
  }
  return out;
}

// --- stage bookkeeping ---------------------------------------------------------------------

namespace {

struct StagePaths {
  std::string artifact;
  std::string meta;
};

StagePaths stage_paths(Stage stage, const PipelineConfig& cfg) {
  const std::string w = cfg.workdir;
  switch (stage) {
    case Stage::Extract: return {w + "/features.jsonl", w + "/extract.meta.json"};
    case Stage::Perturb: return {w + "/neighborhoods.jsonl", w + "/perturb.meta.json"};
    case Stage::Answer: return {w + "/answers.jsonl", w + "/answer.meta.json"};
    case Stage::Score: return {w + "/labels.jsonl", w + "/score.meta.json"};
    case Stage::Fit: return {w + "/model.json", w + "/fit.meta.json"};
    case Stage::Diagnose: return {w + "/report", w + "/diagnose.meta.json"};
  }
  throw ValidationError("bad stage");
}

json similarity_json(const SimilarityConfig& s) {
  return json{{"lambda_bi", s.lambda_bi},
              {"lambda_cross", s.lambda_cross},
              {"threshold", s.threshold},
              {"max_accepted", s.max_accepted}};
}

// Each stage hashes only the config it actually depends on, so e.g. a seed
// change recomputes sampling/fitting stages but not extraction.
std::string stage_config_hash(Stage stage, const PipelineConfig& cfg) {
  json j;
  switch (stage) {
    case Stage::Extract:
      j["detector"] = cfg.detector;
      if (cfg.detector == "llm") j["provider"] = provider_to_json(cfg.detector_provider);
      break;
    case Stage::Perturb:
      j["similarity"] = similarity_json(cfg.similarity);
      j["budget_multiplier"] = cfg.budget_multiplier;
      j["paraphraser"] = provider_to_json(cfg.paraphraser);
      j["bi_encoder"] = provider_to_json(cfg.bi_encoder);
      j["cross_encoder"] = provider_to_json(cfg.cross_encoder);
      j["seed"] = cfg.seed;
      break;
    case Stage::Answer:
      if (cfg.answers_path.empty()) {
        j["answerer"] = provider_to_json(cfg.answerer);
        j["seed"] = cfg.seed;
      } else {
        j["precomputed"] = true;
      }
      break;
    case Stage::Score:
      j["weights"] = json{{"w_llm", cfg.weights.w_llm},
                          {"w_fuzz", cfg.weights.w_fuzz},
                          {"w_bleu", cfg.weights.w_bleu}};
      j["judge"] = provider_to_json(cfg.judge);
      break;
    case Stage::Fit:
      j["spec"] = to_string(cfg.spec);
      j["lambda_reg"] = cfg.fit_options.lambda_reg;
      j["max_iters"] = cfg.fit_options.max_iters;
      j["eval_every"] = cfg.fit_options.eval_every;
      j["patience"] = cfg.fit_options.patience;
      j["lr"] = cfg.fit_options.lr;
      j["val_fraction"] = cfg.fit_options.val_fraction;
      j["seed"] = cfg.seed;
      break;
    case Stage::Diagnose:
      j["length_bins"] = cfg.length_bins;
      j["length_min_bin"] = cfg.length_min_bin;
      j["reliability_bins"] = cfg.reliability_bins;
      j["overlap_alpha"] = cfg.propensity.overlap_alpha;
      j["uplift_report_threshold"] = cfg.propensity.report_threshold;
      j["strata"] = cfg.propensity.strata;
      j["uplift_on_model_probability"] = cfg.uplift_on_model_probability;
      j["spec"] = to_string(cfg.spec);
      j["lambda_reg"] = cfg.fit_options.lambda_reg;
      j["seed"] = cfg.seed;
      break;
  }
  return sha256_hex(j.dump());
}

std::string hash_dir(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) names.push_back(e.path().string());
  std::sort(names.begin(), names.end());
  std::string acc;
  for (const auto& n : names) acc += n + ":" + sha256_file(n) + "\n";
  return sha256_hex(acc);
}

std::string hash_artifact(const std::string& path) {
  return fs::is_directory(path) ? hash_dir(path) : sha256_file(path);
}

void require_input(const std::string& path, const char* what) {
  if (!fs::exists(path))
    throw ValidationError(std::string("missing upstream artifact: ") + what + " (" + path +
                          ")");
}

std::map<std::string, std::string> input_hashes(Stage stage, const PipelineConfig& cfg) {
  std::map<std::string, std::string> in;
  auto paths = [&](Stage s) { return stage_paths(s, cfg).artifact; };
  require_input(cfg.corpus_path, "corpus");
  in["corpus"] = sha256_file(cfg.corpus_path);
  switch (stage) {
    case Stage::Extract:
    case Stage::Perturb:
      break;
    case Stage::Answer:
      require_input(paths(Stage::Perturb), "neighborhoods (run the perturb stage)");
      in["neighborhoods"] = sha256_file(paths(Stage::Perturb));
      if (!cfg.answers_path.empty()) {
        require_input(cfg.answers_path, "precomputed answers");
        in["precomputed_answers"] = sha256_file(cfg.answers_path);
      }
      break;
    case Stage::Score:
      require_input(paths(Stage::Perturb), "neighborhoods (run the perturb stage)");
      require_input(paths(Stage::Answer), "answers (run the answer stage)");
      in["neighborhoods"] = sha256_file(paths(Stage::Perturb));
      in["answers"] = sha256_file(paths(Stage::Answer));
      break;
    case Stage::Fit:
      require_input(paths(Stage::Extract), "features (run the extract stage)");
      require_input(paths(Stage::Score), "labels (run the score stage)");
      in["features"] = sha256_file(paths(Stage::Extract));
      in["labels"] = sha256_file(paths(Stage::Score));
      break;
    case Stage::Diagnose:
      require_input(paths(Stage::Extract), "features (run the extract stage)");
      require_input(paths(Stage::Score), "labels (run the score stage)");
      require_input(paths(Stage::Fit), "model (run the fit stage)");
      in["features"] = sha256_file(paths(Stage::Extract));
      in["labels"] = sha256_file(paths(Stage::Score));
      in["model"] = sha256_file(paths(Stage::Fit));
      break;
  }
  return in;
}

void write_meta(const std::string& meta_path, Stage stage, const std::string& config_hash,
                uint64_t seed, const std::map<std::string, std::string>& inputs,
                const std::string& output_hash) {
  json j;
  j["stage"] = to_string(stage);
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["output_hash"] = output_hash;
  std::ofstream out(meta_path, std::ios::binary);
  out << j.dump(2) << "\n";
}

// true when the recorded meta matches the current config and inputs
bool meta_matches(const std::string& meta_path, const std::string& artifact,
                  const std::string& config_hash,
                  const std::map<std::string, std::string>& inputs) {
  if (!fs::exists(meta_path) || !fs::exists(artifact)) return false;
  std::ifstream in(meta_path, std::ios::binary);
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return false;
  }
  if (j.value("config_hash", "") != config_hash) return false;
  auto recorded = j.value("inputs", json::object());
  json current(inputs);
  return recorded == current;
}

// --- per-stage work ---------------------------------------------------------------------------

std::unordered_map<std::string, const Query*> index_queries(const Corpus& corpus) {
  std::unordered_map<std::string, const Query*> by_id;
  for (const auto& q : corpus.queries) by_id[q.id] = &q;
  return by_id;
}

void do_extract(const PipelineConfig& cfg, const std::string& artifact) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  std::vector<FeatureVector> features;
  features.reserve(corpus.queries.size());
  if (cfg.detector == "llm") {
    Providers prov = make_providers(cfg);
    LlmJudgeDetector backend(prov.detector, cfg.detector_provider);
    for (const auto& q : corpus.queries) features.push_back(extract_features(q, backend));
  } else {
    RuleBasedDetector backend;
    for (const auto& q : corpus.queries) features.push_back(extract_features(q, backend));
  }
  save_features(features, artifact);
}

void do_perturb(const PipelineConfig& cfg, const std::string& artifact) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  Providers prov = make_providers(cfg);
  auto sampler = make_paraphrase_sampler(prov.paraphraser, mix_seed(cfg.seed, "perturb"));
  const int budget = cfg.budget_multiplier * cfg.similarity.max_accepted;

  std::vector<Neighborhood> hoods;
  hoods.reserve(corpus.queries.size());
  for (const auto& q : corpus.queries) {
    Neighborhood h = build_neighborhood(q, sampler, *prov.bi, *prov.cross, cfg.similarity,
                                        budget);
    if (h.paraphrases.empty())
      std::fprintf(stderr,
                   "warning: no paraphrase passed the similarity gate for query %s; "
                   "it will stay unlabeled\n",
                   q.id.c_str());
    hoods.push_back(std::move(h));
  }
  save_neighborhoods(hoods, artifact);
}

void do_answer(const PipelineConfig& cfg, const std::string& artifact) {
  if (!cfg.answers_path.empty()) {
    // precomputed answers: validate shape against the neighborhoods, reserialize
    auto answers = load_answers(cfg.answers_path);
    save_answers(answers, artifact);
    return;
  }
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto by_id = index_queries(corpus);
  auto hoods = load_neighborhoods(stage_paths(Stage::Perturb, cfg).artifact);
  Providers prov = make_providers(cfg);

  std::vector<AnswerRecord> answers;
  for (const auto& h : hoods) {
    auto it = by_id.find(h.source_id);
    if (it == by_id.end())
      throw ValidationError("neighborhood references unknown query: " + h.source_id);
    const Query& q = *it->second;
    for (size_t k = 0; k < h.paraphrases.size(); ++k) {
      std::string prompt = answer_prompt(h.paraphrases[k].text, q.context, q.choices);
      uint64_t seed = mix_seed(mix_seed(mix_seed(cfg.seed, "answer"), q.id),
                               static_cast<uint64_t>(k));
      answers.push_back({q.id, static_cast<int>(k), prov.answerer->complete(prompt, seed)});
    }
  }
  save_answers(answers, artifact);
}

void do_score(const PipelineConfig& cfg, const std::string& labels_path) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto by_id = index_queries(corpus);
  auto hoods = load_neighborhoods(stage_paths(Stage::Perturb, cfg).artifact);
  auto answers = load_answers(stage_paths(Stage::Answer, cfg).artifact);
  Providers prov = make_providers(cfg);

  std::map<std::string, std::map<int, std::string>> by_query;
  for (const auto& a : answers) by_query[a.query_id][a.paraphrase_index] = a.answer;

  std::vector<ScoredParaphrase> scores;
  std::vector<RiskLabel> labels;
  for (const auto& h : hoods) {
    if (h.paraphrases.empty()) continue;
    auto it = by_id.find(h.source_id);
    if (it == by_id.end())
      throw ValidationError("neighborhood references unknown query: " + h.source_id);
    const Query& q = *it->second;
    if (!q.gold || q.gold->empty()) {
      std::fprintf(stderr, "warning: query %s has no gold answers; skipped in labeling\n",
                   q.id.c_str());
      continue;
    }
    auto ait = by_query.find(h.source_id);
    if (ait == by_query.end() || ait->second.size() != h.paraphrases.size())
      throw ValidationError("answers missing for query " + h.source_id);

    int tally = 0;
    for (size_t k = 0; k < h.paraphrases.size(); ++k) {
      ProxyScore s =
          score_paraphrase(q, ait->second.at(static_cast<int>(k)), cfg.weights, *prov.judge);
      if (s.hallucinated) ++tally;
      scores.push_back({q.id, static_cast<int>(k), s});
    }
    labels.push_back(make_risk_label(q.id, tally, static_cast<int>(h.paraphrases.size())));
  }
  save_scores(scores, cfg.workdir + "/scores.jsonl");
  save_labels(labels, labels_path);
}

void do_fit(const PipelineConfig& cfg, const std::string& artifact) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto features = load_features(stage_paths(Stage::Extract, cfg).artifact);
  auto labels = load_labels(stage_paths(Stage::Score, cfg).artifact);

  NumericStats stats = compute_numeric_stats(features);
  apply_numeric_stats(features, stats);
  DesignMatrix design = make_design(corpus, features, labels);

  FitOptions fo = cfg.fit_options;
  fo.seed = cfg.seed;
  OrdinalModel model = fit(design, cfg.spec, fo);
  model.numeric_stats = stats;
  save_model(model, artifact);
}

void do_diagnose(const PipelineConfig& cfg, const std::string& report_dir,
                 const std::string& config_hash,
                 const std::map<std::string, std::string>& inputs) {
  Corpus corpus = load_corpus(cfg.corpus_path);
  auto features = load_features(stage_paths(Stage::Extract, cfg).artifact);
  auto labels = load_labels(stage_paths(Stage::Score, cfg).artifact);
  OrdinalModel model = load_model(stage_paths(Stage::Fit, cfg).artifact);

  // standardize with the model's frozen statistics, never re-estimated here
  apply_numeric_stats(features, model.numeric_stats);
  DesignMatrix design = make_design(corpus, features, labels);
  if (design.n == 0) throw ValidationError("no labeled rows to diagnose");

  fs::create_directories(report_dir);

  std::vector<double> p_risky(design.n);
  std::vector<int> risky(design.n);
  for (int r = 0; r < design.n; ++r) {
    p_risky[r] = predict_design_row(model, design, r).p_risky;
    risky[r] = design.outcome[r] == 2 ? 1 : 0;
  }

  // ECDF separations per binary feature
  std::vector<EcdfSeparation> seps;
  for (int c = 0; c < kNumBinaryFeatures; ++c) {
    std::vector<int> presence(design.n);
    for (int r = 0; r < design.n; ++r) presence[r] = design.feat(r, c) != 0.0 ? 1 : 0;
    try {
      EcdfSeparation s = ecdf_separation(p_risky, presence);
      s.feature = design.feature_names[c];
      seps.push_back(std::move(s));
    } catch (const ValidationError&) {
      std::fprintf(stderr, "warning: feature %s has a single group; separation skipped\n",
                   design.feature_names[c].c_str());
    }
  }
  write_separations_csv(seps, report_dir + "/separations.csv");

  // rank correlations across all 21 feature columns
  std::vector<std::vector<double>> columns(kNumFeatures,
                                           std::vector<double>(design.n));
  for (int c = 0; c < kNumFeatures; ++c)
    for (int r = 0; r < design.n; ++r) columns[c][r] = design.feat(r, c);
  auto correlations = rank_correlations(columns, design.outcome);
  write_correlations_csv(design.feature_names, correlations,
                         report_dir + "/correlations.csv");

  // calibration: overall plus present/absent strata per binary feature
  std::vector<std::pair<std::string, ReliabilityResult>> calib;
  calib.emplace_back("all", reliability(p_risky, risky, cfg.reliability_bins));
  for (int c = 0; c < kNumBinaryFeatures; ++c) {
    std::vector<double> pred_p, pred_a;
    std::vector<int> out_p, out_a;
    for (int r = 0; r < design.n; ++r) {
      if (design.feat(r, c) != 0.0) {
        pred_p.push_back(p_risky[r]);
        out_p.push_back(risky[r]);
      } else {
        pred_a.push_back(p_risky[r]);
        out_a.push_back(risky[r]);
      }
    }
    if (static_cast<int>(pred_p.size()) >= cfg.reliability_bins)
      calib.emplace_back(design.feature_names[c] + ":present",
                         reliability(pred_p, out_p, cfg.reliability_bins));
    if (static_cast<int>(pred_a.size()) >= cfg.reliability_bins)
      calib.emplace_back(design.feature_names[c] + ":absent",
                         reliability(pred_a, out_a, cfg.reliability_bins));
  }
  write_calibration_csv(calib, report_dir + "/calibration.csv");

  // risk vs token length per binary feature
  const int len_col = feature_index(FeatureName::QueryTokenLength) - kNumBinaryFeatures;
  std::unordered_map<std::string, int> raw_len;
  for (const auto& fv : features) raw_len[fv.query_id] = fv.numeric_raw[len_col];
  std::vector<int> lengths;
  {
    std::unordered_map<std::string, const RiskLabel*> label_by_id;
    for (const auto& l : labels) label_by_id[l.query_id] = &l;
    std::unordered_map<std::string, const FeatureVector*> fv_by_id;
    for (const auto& fv : features) fv_by_id[fv.query_id] = &fv;
    for (const auto& q : corpus.queries)
      if (fv_by_id.count(q.id) && label_by_id.count(q.id))
        lengths.push_back(raw_len.at(q.id));
  }
  std::vector<std::pair<std::string, std::vector<LengthBinRow>>> curves;
  for (int c = 0; c < kNumBinaryFeatures; ++c) {
    std::vector<LengthItem> items(design.n);
    for (int r = 0; r < design.n; ++r)
      items[r] = {lengths[r], risky[r], design.feat(r, c) != 0.0 ? 1 : 0};
    curves.emplace_back(design.feature_names[c],
                        risk_vs_length(items, cfg.length_bins, cfg.length_min_bin));
  }
  write_length_curves_csv(curves, report_dir + "/length_curves.csv");

  // propensity overlap and gated uplifts per binary feature
  std::vector<double> uplift_outcome(design.n);
  for (int r = 0; r < design.n; ++r)
    uplift_outcome[r] = cfg.uplift_on_model_probability ? p_risky[r]
                                                        : static_cast<double>(risky[r]);
  std::vector<PropensityResult> props;
  for (int c = 0; c < kNumBinaryFeatures; ++c) {
    try {
      props.push_back(propensity_with_uplifts(c, design, uplift_outcome, cfg.propensity));
    } catch (const ValidationError&) {
      std::fprintf(stderr, "warning: feature %s has a single group; propensity skipped\n",
                   design.feature_names[c].c_str());
    }
  }
  write_propensity_csv(props, report_dir + "/propensity.csv");

  // coefficient table and LODO stability
  save_coefficient_csv(report_table(model, design), report_dir + "/coefficients.csv");

  FitOptions fo = cfg.fit_options;
  fo.seed = cfg.seed;
  if (design.dataset_levels.size() >= 2) {
    LodoResult lr = lodo(design, cfg.spec, fo);
    save_lodo_csv(lr, design.feature_names, report_dir + "/lodo.csv");
  } else {
    std::ofstream out(report_dir + "/lodo.csv", std::ios::binary);
    out << "feature,pooled_beta,mean_beta,stddev_beta,n_holds\n";
    std::fprintf(stderr, "warning: single dataset; LODO skipped\n");
  }

  json manifest;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = cfg.seed;
  manifest["inputs"] = inputs;
  std::ofstream mf(report_dir + "/manifest.json", std::ios::binary);
  mf << manifest.dump(2) << "\n";
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& cfg) {
  if (cfg.corpus_path.empty()) throw ValidationError("config is missing the corpus path");
  fs::create_directories(cfg.workdir);

  StagePaths paths = stage_paths(stage, cfg);
  const std::string config_hash = stage_config_hash(stage, cfg);
  const auto inputs = input_hashes(stage, cfg);

  if (meta_matches(paths.meta, paths.artifact, config_hash, inputs)) {
    StageResult r;
    r.artifact = paths.artifact;
    r.skipped = true;
    r.output_hash = hash_artifact(paths.artifact);
    return r;
  }
  if (cfg.strict_resume && fs::exists(paths.artifact))
    throw ValidationError(std::string("hash mismatch in resume mode for stage ") +
                          to_string(stage) + "; remove " + paths.artifact +
                          " or rerun without strict resume");

  switch (stage) {
    case Stage::Extract: do_extract(cfg, paths.artifact); break;
    case Stage::Perturb: do_perturb(cfg, paths.artifact); break;
    case Stage::Answer: do_answer(cfg, paths.artifact); break;
    case Stage::Score: do_score(cfg, paths.artifact); break;
    case Stage::Fit: do_fit(cfg, paths.artifact); break;
    case Stage::Diagnose: do_diagnose(cfg, paths.artifact, config_hash, inputs); break;
  }

  StageResult r;
  r.artifact = paths.artifact;
  r.output_hash = hash_artifact(paths.artifact);
  write_meta(paths.meta, stage, config_hash, cfg.seed, inputs, r.output_hash);
  return r;
}

// --- triage -------------------------------------------------------------------------------

TriageResult triage(const std::string& query_text, Scenario scenario,
                    const OrdinalModel& model, DetectorBackend& backend, double threshold,
                    const TriageRules& rules) {
  Query q;
  q.id = "triage";
  q.text = query_text;
  q.scenario = scenario;
  q.dataset = "";  // unknown dataset maps to the reference level

  TriageResult result;
  result.features = extract_features(q, backend);

  PredictRow row;
  for (FeatureName f : binary_feature_names())
    row.features[feature_index(f)] = result.features.binary_at(f);
  for (int k = 0; k < kNumNumericFeatures; ++k) {
    FeatureName f = numeric_feature_names()[k];
    double raw = result.features.numeric_raw[k];
    double sd = model.numeric_stats.stddev[k];
    row.features[feature_index(f)] =
        sd == 0.0 ? 0.0 : (raw - model.numeric_stats.mean[k]) / sd;
  }
  row.scenario = to_string(scenario);

  result.p_risky = predict(model, row).p_risky;
  if (result.p_risky < threshold) {
    result.route = TriageRoute::Direct;
    return result;
  }
  bool clarify = false;
  for (FeatureName f : rules.clarify_when_present)
    if (result.features.binary_at(f) == 1) clarify = true;
  for (FeatureName f : rules.clarify_when_absent)
    if (result.features.binary_at(f) == 0) clarify = true;
  result.route = clarify ? TriageRoute::Clarify : TriageRoute::Ground;
  return result;
}

}  // namespace qrisk
