#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qrisk {

enum class Scenario { Extractive, MultipleChoice, Abstractive };

const char* to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);  // throws ValidationError on unknown

// One corpus item. Immutable after load; safe to share across readers.
struct Query {
  std::string id;
  std::string text;
  Scenario scenario = Scenario::Abstractive;
  std::string dataset;
  std::optional<std::string> context;
  std::optional<std::vector<std::string>> choices;  // MultipleChoice only
  std::optional<std::vector<std::string>> gold;

  // Optional precomputed syntactic annotations (override the baseline provider).
  std::optional<int> n_tokens;
  std::optional<int> n_clauses;
  std::optional<int> dep_depth;
  std::optional<int> parse_height;
};

struct Corpus {
  std::vector<Query> queries;
  std::set<std::string> datasets;    // distinct values present in queries
  std::set<Scenario> scenarios;      // distinct values present in queries
};

enum class RiskCategory { Safe = 0, Borderline = 1, Risky = 2 };

const char* to_string(RiskCategory c);
RiskCategory risk_category_from_string(const std::string& s);

// Safe iff tally = 0; Risky iff tally/m >= 4/6; Borderline otherwise.
// Total on 0 <= tally <= m; throws ValidationError outside that range.
RiskCategory risk_category(int tally, int m);

// Ordinal outcome for one query with the underlying paraphrase tally.
struct RiskLabel {
  std::string query_id;
  int tally = 0;
  int m = 6;
  RiskCategory category = RiskCategory::Safe;
};

RiskLabel make_risk_label(const std::string& query_id, int tally, int m);

// JSONL ingestion/persistence. UTF-8, LF newlines.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

std::vector<RiskLabel> load_labels(const std::string& path);
void save_labels(const std::vector<RiskLabel>& labels, const std::string& path);

}  // namespace qrisk
