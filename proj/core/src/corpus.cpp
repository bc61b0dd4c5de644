#include "qrisk/corpus.hpp"

#include <json.hpp>

#include <fstream>
#include <unordered_map>

#include "qrisk/errors.hpp"

namespace qrisk {

using nlohmann::json;

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Extractive: return "Extractive";
    case Scenario::MultipleChoice: return "MultipleChoice";
    case Scenario::Abstractive: return "Abstractive";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "Extractive") return Scenario::Extractive;
  if (s == "MultipleChoice") return Scenario::MultipleChoice;
  if (s == "Abstractive") return Scenario::Abstractive;
  throw ValidationError("unknown scenario: \"" + s + "\"");
}

const char* to_string(RiskCategory c) {
  switch (c) {
    case RiskCategory::Safe: return "Safe";
    case RiskCategory::Borderline: return "Borderline";
    case RiskCategory::Risky: return "Risky";
  }
  return "?";
}

RiskCategory risk_category_from_string(const std::string& s) {
  if (s == "Safe") return RiskCategory::Safe;
  if (s == "Borderline") return RiskCategory::Borderline;
  if (s == "Risky") return RiskCategory::Risky;
  throw ValidationError("unknown risk category: \"" + s + "\"");
}

RiskCategory risk_category(int tally, int m) {
  if (m < 1) throw ValidationError("neighborhood size m must be >= 1");
  if (tally < 0 || tally > m)
    throw ValidationError("tally " + std::to_string(tally) + " outside [0, " +
                          std::to_string(m) + "]");
  if (tally == 0) return RiskCategory::Safe;
  // tally/m >= 4/6 without float arithmetic.
  if (3 * tally >= 2 * m) return RiskCategory::Risky;
  return RiskCategory::Borderline;
}

RiskLabel make_risk_label(const std::string& query_id, int tally, int m) {
  return RiskLabel{query_id, tally, m, risk_category(tally, m)};
}

namespace {

std::vector<std::string> string_list(const json& v, const char* field, int line) {
  if (!v.is_array())
    throw ValidationError("line " + std::to_string(line) + ": field \"" + field +
                          "\" must be a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string())
      throw ValidationError("line " + std::to_string(line) + ": field \"" + field +
                            "\" must be a list of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Query parse_query_line(const json& j, int line) {
  Query q;
  for (const char* req : {"id", "text", "scenario", "dataset"}) {
    if (!j.contains(req) || !j.at(req).is_string())
      throw ValidationError("line " + std::to_string(line) +
                            ": missing or non-string field \"" + req + "\"");
  }
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  if (q.text.empty())
    throw ValidationError("line " + std::to_string(line) + ": empty query text");
  try {
    q.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  } catch (const ValidationError& e) {
    throw ValidationError("line " + std::to_string(line) + ": " + e.what());
  }
  q.dataset = j.at("dataset").get<std::string>();
  if (j.contains("context")) q.context = j.at("context").get<std::string>();
  if (j.contains("choices")) {
    if (q.scenario != Scenario::MultipleChoice)
      throw ValidationError("line " + std::to_string(line) + ": query \"" + q.id +
                            "\" has choices but scenario is not MultipleChoice");
    q.choices = string_list(j.at("choices"), "choices", line);
  }
  if (j.contains("gold")) q.gold = string_list(j.at("gold"), "gold", line);
  auto opt_int = [&](const char* name) -> std::optional<int> {
    if (!j.contains(name)) return std::nullopt;
    if (!j.at(name).is_number_integer() || j.at(name).get<int>() < 0)
      throw ValidationError("line " + std::to_string(line) + ": field \"" +
                            std::string(name) + "\" must be a non-negative integer");
    return j.at(name).get<int>();
  };
  q.n_tokens = opt_int("n_tokens");
  q.n_clauses = opt_int("n_clauses");
  q.dep_depth = opt_int("dep_depth");
  q.parse_height = opt_int("parse_height");
  return q;
}

json query_to_json(const Query& q) {
  json j;
  j["id"] = q.id;
  j["text"] = q.text;
  j["scenario"] = to_string(q.scenario);
  j["dataset"] = q.dataset;
  if (q.context) j["context"] = *q.context;
  if (q.choices) j["choices"] = *q.choices;
  if (q.gold) j["gold"] = *q.gold;
  if (q.n_tokens) j["n_tokens"] = *q.n_tokens;
  if (q.n_clauses) j["n_clauses"] = *q.n_clauses;
  if (q.dep_depth) j["dep_depth"] = *q.dep_depth;
  if (q.parse_height) j["parse_height"] = *q.parse_height;
  return j;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file: " + path);

  Corpus corpus;
  std::unordered_map<std::string, int> first_seen;  // id -> line number
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
    if (!j.is_object())
      throw ValidationError("line " + std::to_string(line_no) + ": expected a JSON object");
    Query q = parse_query_line(j, line_no);
    auto [it, inserted] = first_seen.emplace(q.id, line_no);
    if (!inserted)
      throw ValidationError("duplicate query id \"" + q.id + "\" at lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
    corpus.datasets.insert(q.dataset);
    corpus.scenarios.insert(q.scenario);
    corpus.queries.push_back(std::move(q));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write corpus file: " + path);
  for (const auto& q : corpus.queries) out << query_to_json(q).dump() << "\n";
}

std::vector<RiskLabel> load_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open labels file: " + path);
  std::vector<RiskLabel> out;
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
    RiskLabel label;
    label.query_id = j.at("query_id").get<std::string>();
    label.tally = j.at("tally").get<int>();
    label.m = j.at("m").get<int>();
    label.category = risk_category_from_string(j.at("category").get<std::string>());
    if (label.category != risk_category(label.tally, label.m))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": category inconsistent with tally " +
                            std::to_string(label.tally) + "/" + std::to_string(label.m));
    out.push_back(std::move(label));
  }
  return out;
}

void save_labels(const std::vector<RiskLabel>& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write labels file: " + path);
  for (const auto& l : labels) {
    json j;
    j["query_id"] = l.query_id;
    j["tally"] = l.tally;
    j["m"] = l.m;
    j["category"] = to_string(l.category);
    out << j.dump() << "\n";
  }
}

}  // namespace qrisk
