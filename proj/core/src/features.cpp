#include "qrisk/features.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <unordered_set>

#include "qrisk/errors.hpp"
#include "qrisk/prompts.hpp"

namespace qrisk {

using nlohmann::json;

// --- feature name tables --------------------------------------------------------

namespace {

struct FeatureInfo {
  FeatureName f;
  const char* id;
  const char* display;
};

constexpr std::array<FeatureInfo, kNumFeatures> kFeatureInfo{{
    {FeatureName::LackOfSpecificity, "LackOfSpecificity", "Lack of Specificity"},
    {FeatureName::ClauseComplexity, "ClauseComplexity", "Clause Complexity"},
    {FeatureName::NegationUsage, "NegationUsage", "Negation Usage"},
    {FeatureName::ExcessiveDetails, "ExcessiveDetails", "Excessive Details"},
    {FeatureName::AnaphoraUsage, "AnaphoraUsage", "Anaphora Usage"},
    {FeatureName::PolysemousWords, "PolysemousWords", "Polysemous Words"},
    {FeatureName::RareWordUsage, "RareWordUsage", "Rare Word Usage"},
    {FeatureName::PragmaticFeatures, "PragmaticFeatures", "Pragmatic Features"},
    {FeatureName::Presupposition, "Presupposition", "Presupposition"},
    {FeatureName::ContextualConstraints, "ContextualConstraints", "Contextual Constraints"},
    {FeatureName::NamedEntitiesPresent, "NamedEntitiesPresent", "Named Entities Present"},
    {FeatureName::DomainSpecificity, "DomainSpecificity", "Domain Specificity"},
    {FeatureName::QueryScenarioMismatch, "QueryScenarioMismatch", "Query-Scenario Mismatch"},
    {FeatureName::SuperlativeUsage, "SuperlativeUsage", "Superlative Usage"},
    {FeatureName::IntentionGrounding, "IntentionGrounding", "Intention Grounding"},
    {FeatureName::Subjectivity, "Subjectivity", "Subjectivity"},
    {FeatureName::Answerability, "Answerability", "Answerability"},
    {FeatureName::QueryTokenLength, "QueryTokenLength", "Query Token Length"},
    {FeatureName::NumberOfClauses, "NumberOfClauses", "Number of Clauses"},
    {FeatureName::DependencyDepth, "DependencyDepth", "Dependency Depth"},
    {FeatureName::ParseTreeHeight, "ParseTreeHeight", "Parse Tree Height"},
}};

}  // namespace

const std::array<FeatureName, kNumBinaryFeatures>& binary_feature_names() {
  static const auto names = [] {
    std::array<FeatureName, kNumBinaryFeatures> out{};
    for (int i = 0; i < kNumBinaryFeatures; ++i) out[i] = kFeatureInfo[i].f;
    return out;
  }();
  return names;
}

const std::array<FeatureName, kNumNumericFeatures>& numeric_feature_names() {
  static const auto names = [] {
    std::array<FeatureName, kNumNumericFeatures> out{};
    for (int i = 0; i < kNumNumericFeatures; ++i)
      out[i] = kFeatureInfo[kNumBinaryFeatures + i].f;
    return out;
  }();
  return names;
}

bool is_binary_feature(FeatureName f) { return feature_index(f) < kNumBinaryFeatures; }

const char* to_string(FeatureName f) { return kFeatureInfo[feature_index(f)].id; }

const char* display_name(FeatureName f) { return kFeatureInfo[feature_index(f)].display; }

FeatureName feature_from_string(const std::string& name) {
  for (const auto& info : kFeatureInfo)
    if (name == info.id || name == info.display) return info.f;
  throw ValidationError("unknown feature name: \"" + name + "\"");
}

int feature_index(FeatureName f) { return static_cast<int>(f); }

int FeatureVector::binary_at(FeatureName f) const { return binary[feature_index(f)]; }

int FeatureVector::raw_at(FeatureName f) const {
  return numeric_raw[feature_index(f) - kNumBinaryFeatures];
}

double FeatureVector::scaled_at(FeatureName f) const {
  return numeric_scaled[feature_index(f) - kNumBinaryFeatures];
}

const std::string& FeatureVector::rationale_at(FeatureName f) const {
  return rationales[feature_index(f)];
}

// --- tokenisation helpers ---------------------------------------------------------

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Strips a trailing possessive ("tesla's" -> "tesla").
std::string strip_possessive(const std::string& tok) {
  if (ends_with(tok, "'s")) return tok.substr(0, tok.size() - 2);
  return tok;
}

bool all_alpha(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalpha(c);
  });
}

// Auxiliary/inflection heuristic: does this token start a verb phrase?
bool verb_like(const std::string& tok) {
  static const std::unordered_set<std::string> aux = {
      "is",   "was",  "are",   "were", "has",   "have",  "had",  "will",
      "would", "can", "could", "should", "may", "might", "does", "did",
      "do",   "been", "being", "must"};
  if (aux.count(tok)) return true;
  return tok.size() > 3 && (ends_with(tok, "ed") || ends_with(tok, "s"));
}

struct QueryView {
  std::vector<std::string> raw;     // whitespace tokens, original case
  std::vector<std::string> toks;    // content tokens, lowercased, punct-stripped
  std::string folded;               // normalized lowercase text
};

QueryView make_view(std::string_view text) {
  QueryView v;
  v.raw = whitespace_tokens(text);
  v.toks = content_tokens(text);
  v.folded = normalize_ws(text);
  return v;
}

bool has_phrase(const QueryView& v, std::string_view phrase) {
  return v.folded.find(phrase) != std::string::npos;
}

std::optional<size_t> find_token(const QueryView& v, std::string_view word) {
  for (size_t i = 0; i < v.toks.size(); ++i)
    if (v.toks[i] == word) return i;
  return std::nullopt;
}

// --- clause counting ----------------------------------------------------------------

// Subordinators that head a clause wherever they appear.
const std::unordered_set<std::string>& plain_subordinators() {
  static const std::unordered_set<std::string> set = {
      "because", "although", "though", "unless", "whereas", "while",
      "whenever", "wherever", "until", "if"};
  return set;
}

// Wh-relativizers head a clause only in non-initial position ("the memo that
// leaked"); sentence-initially they are interrogative.
const std::unordered_set<std::string>& wh_relativizers() {
  static const std::unordered_set<std::string> set = {"which", "who", "whom",
                                                      "whose", "when", "what"};
  return set;
}

int clause_marker_count(const QueryView& v) {
  int markers = 0;
  for (size_t i = 0; i < v.toks.size(); ++i) {
    const std::string& t = v.toks[i];
    if (plain_subordinators().count(t)) {
      ++markers;
    } else if (i > 0 && wh_relativizers().count(t)) {
      ++markers;
    } else if (i > 0 && t == "that") {
      // relativizer/complementizer when a verb phrase follows
      if (i + 1 < v.toks.size() && verb_like(v.toks[i + 1])) ++markers;
    }
  }
  return markers;
}

}  // namespace

int count_tokens(std::string_view text, const Tokenizer& tokenizer) {
  return static_cast<int>(tokenizer(text).size());
}

int count_tokens(std::string_view text) {
  return static_cast<int>(whitespace_tokens(text).size());
}

int count_clauses(std::string_view text) {
  QueryView v = make_view(text);
  if (v.raw.empty()) return 0;
  return 1 + clause_marker_count(v);
}

SyntaxProvider baseline_syntax_provider() {
  return [](std::string_view text) -> SyntaxAnnotations {
    QueryView v = make_view(text);
    if (v.raw.empty()) return {0, 0};
    if (v.raw.size() == 1) return {1, 1};
    static const std::unordered_set<std::string> preps = {
        "of", "in", "on", "at", "with", "for", "from", "by", "about", "into",
        "over", "under", "between", "through", "during", "against", "within"};
    int n_prep = 0;
    for (const auto& t : v.toks) n_prep += preps.count(t) ? 1 : 0;
    int markers = clause_marker_count(v);
    SyntaxAnnotations a;
    a.dep_depth = 2 + markers + std::min(3, n_prep);
    a.parse_height = 3 + markers + std::min(2, n_prep);
    return a;
  };
}

// --- rule-based binary detectors ------------------------------------------------------

namespace {

Detection yes(std::string why) { return {true, std::move(why)}; }
Detection no(std::string why) { return {false, std::move(why)}; }

Detection detect_negation(const QueryView& v) {
  static const std::unordered_set<std::string> neg = {
      "not", "no", "never", "without", "hardly", "scarcely",
      "cannot", "none", "nor", "neither"};
  for (const auto& t : v.toks) {
    if (neg.count(t)) return yes("negation marker '" + t + "'");
    if (ends_with(t, "n't")) return yes("negated auxiliary '" + t + "'");
  }
  return no("no negation markers");
}

Detection detect_superlative(const QueryView& v) {
  static const std::unordered_set<std::string> lexical = {"most", "least", "best",
                                                          "worst", "first"};
  // -est morphology minus common non-superlative stems
  static const std::unordered_set<std::string> est_stoplist = {
      "test",    "rest",    "west",    "nest",    "guest",   "quest",
      "pest",    "chest",   "crest",   "forest",  "harvest", "interest",
      "honest",  "arrest",  "request", "suggest", "protest", "earnest",
      "modest",  "invest",  "manifest", "digest", "contest", "priest"};
  for (const auto& t : v.toks) {
    if (lexical.count(t)) return yes("superlative marker '" + t + "'");
    if (t.size() >= 4 && ends_with(t, "est") && !est_stoplist.count(t) && all_alpha(t))
      return yes("superlative form '" + t + "'");
  }
  return no("no superlative forms");
}

Detection detect_anaphora(const QueryView& v) {
  static const std::unordered_set<std::string> pronouns = {
      "it",  "he",  "she",  "they", "him",   "her",  "them", "his",
      "hers", "its", "their", "theirs", "this", "these", "those"};
  for (size_t i = 0; i < v.toks.size(); ++i) {
    const std::string& t = v.toks[i];
    if (pronouns.count(t))
      return yes("anaphoric reference '" + t + "' without local antecedent");
    if (t.rfind("it'", 0) == 0 || t.rfind("they'", 0) == 0 || t.rfind("he'", 0) == 0 ||
        t.rfind("she'", 0) == 0)
      return yes("anaphoric contraction '" + t + "'");
    if (t == "that") {
      // demonstrative reading unless a verb phrase follows (relativizer)
      bool relativizer = i + 1 < v.toks.size() && verb_like(v.toks[i + 1]);
      if (!relativizer && i > 0)
        return yes("demonstrative 'that' requires prior discourse");
    }
  }
  return no("fully self-contained; no anaphoric expressions");
}

Detection detect_lack_of_specificity(const QueryView& v) {
  static const char* phrases[] = {
      "tell me about",  "talk about",      "what about",
      "tell me something", "everything about", "things about",
      "what happened",  "give me information", "and stuff"};
  for (const char* p : phrases)
    if (has_phrase(v, p)) return yes(std::string("underspecified opener '") + p + "'");
  if (find_token(v, "stuff")) return yes("vague scope word 'stuff'");
  if (!v.toks.empty() && v.toks[0] == "compare" && v.toks.size() <= 3)
    return yes("comparison without stated criteria or entities");
  return no("scope, entity, or task is pinned down");
}

Detection detect_excessive_details(const QueryView& v) {
  static const char* phrases[] = {"by the way", "incidentally", "as an aside"};
  for (const char* p : phrases)
    if (has_phrase(v, p)) return yes(std::string("digression marker '") + p + "'");
  static const char* openers[] = {"in my ", "given my ", "with my ", "at my "};
  for (const char* p : openers)
    if (v.folded.rfind(p, 0) == 0 || has_phrase(v, std::string(", ") + p))
      return yes("personal aside irrelevant to the request");
  int commas = static_cast<int>(std::count(v.folded.begin(), v.folded.end(), ','));
  if (static_cast<int>(v.raw.size()) >= 20 && commas >= 2)
    return yes("long query with stacked asides");
  return no("no extraneous details");
}

Detection detect_polysemy(const QueryView& v) {
  struct Entry {
    const char* word;
    std::vector<const char*> cues;  // any cue disambiguates the sense
  };
  static const std::vector<Entry> table = {
      {"bank", {"account", "money", "deposit", "loan", "financial", "river", "teller"}},
      {"cell", {"prison", "battery", "phone", "solar", "blood", "stem"}},
      {"java", {"language", "programming", "code", "island", "indonesia", "coffee"}},
      {"mercury", {"thermometer", "freddie"}},
      {"mouth", {"river", "teeth", "taste"}},
      {"spring", {"season", "water", "coil", "mattress"}},
      {"python", {"language", "programming", "code", "snake"}},
      {"pitch", {"baseball", "music", "sales", "tar"}},
      {"scale", {"fish", "music", "weight", "map"}},
      {"crane", {"bird", "construction", "machine"}},
      {"bolt", {"lightning", "door", "screw"}},
  };
  std::set<std::string> bases;
  for (const auto& t : v.toks) bases.insert(strip_possessive(t));
  for (const auto& e : table) {
    if (!bases.count(e.word)) continue;
    bool disambiguated = false;
    for (const char* cue : e.cues)
      if (bases.count(cue)) {
        disambiguated = true;
        break;
      }
    if (!disambiguated)
      return yes(std::string("'") + e.word + "' has multiple senses and no cue resolves it");
  }
  return no("no under-specified polysemous words");
}

Detection detect_rare_words(const QueryView& v) {
  static const std::unordered_set<std::string> rare = {
      "syzygy",    "rhabdomyolysis", "trapezium",   "heteroscedasticity",
      "pathophysiology", "decoherence", "ontological", "epistemic",
      "sesquipedalian", "apophenia"};
  for (const auto& t : v.toks) {
    std::string base = strip_possessive(t);
    if (rare.count(base)) return yes("rare term '" + base + "'");
    if (all_alpha(base) && base.size() >= 14)
      return yes("low-frequency long term '" + base + "'");
  }
  return no("common vocabulary only");
}

Detection detect_pragmatics(const QueryView& v) {
  static const char* phrases[] = {"can you", "could you", "would you", "should we",
                                  "this time"};
  for (const char* p : phrases)
    if (has_phrase(v, p))
      return yes(std::string("indirect speech act marker '") + p + "'");
  if (find_token(v, "really")) return yes("rhetorical 'really' implies indirect intent");
  if (find_token(v, "here")) return yes("deictic 'here' depends on situational context");
  return no("literal request; no pragmatic inference required");
}

Detection detect_presupposition(const QueryView& v) {
  static const std::unordered_set<std::string> triggers = {
      "again", "still", "anymore", "stop", "stopped", "stops",
      "admit", "admitted", "admits", "now"};
  static const std::unordered_set<std::string> contractions = {
      "it's",   "what's", "who's", "there's", "let's",
      "that's", "here's", "how's", "where's"};
  for (const auto& t : v.toks)
    if (triggers.count(t)) return yes("presupposition trigger '" + t + "'");
  for (const auto& t : v.toks)
    if (ends_with(t, "'s") && !contractions.count(t) && all_alpha(strip_possessive(t)))
      return yes("possessive '" + t + "' presupposes the possession holds");
  if (find_token(v, "would") && find_token(v, "if"))
    return yes("counterfactual 'would ... if' construction");
  if (has_phrase(v, "used to")) return yes("'used to' presupposes a past state");
  return no("no presupposed event or state");
}

Detection detect_contextual_constraints(const QueryView& v) {
  static const std::regex year_re("\\b(1[789]|20)\\d{2}\\b");
  if (std::regex_search(v.folded, year_re)) return yes("explicit year narrows the scope");
  static const std::regex clock_re("\\b\\d{1,2}\\s?(am|pm)\\b");
  if (std::regex_search(v.folded, clock_re)) return yes("time-of-day constraint");
  static const std::unordered_set<std::string> months = {
      "january", "february", "march",     "april",   "may",      "june",
      "july",    "august",   "september", "october", "november", "december"};
  static const std::unordered_set<std::string> places = {
      "us", "u.s", "u.s.", "uk", "eu", "nyc", "england", "europe", "america"};
  static const std::unordered_set<std::string> scope_words = {"during", "between",
                                                              "only"};
  for (const auto& t : v.toks) {
    std::string base = strip_possessive(t);
    if (months.count(base)) return yes("month constraint '" + base + "'");
    if (places.count(base)) return yes("location constraint '" + base + "'");
    if (scope_words.count(base)) return yes("scope restriction '" + base + "'");
  }
  return no("no narrowing conditions");
}

Detection detect_named_entities(const QueryView& v) {
  for (size_t i = 0; i < v.raw.size(); ++i) {
    const std::string& t = v.raw[i];
    // all-caps acronym anywhere (CDC, RSV)
    std::string alpha;
    for (char c : t)
      if (std::isalpha(static_cast<unsigned char>(c))) alpha.push_back(c);
    if (alpha.size() >= 2 &&
        std::all_of(alpha.begin(), alpha.end(),
                    [](unsigned char c) { return std::isupper(c); }))
      return yes("acronym entity '" + alpha + "'");
    // capitalized word past the sentence start
    if (i > 0 && std::isupper(static_cast<unsigned char>(t[0])) && alpha.size() >= 2) {
      std::string base = strip_possessive(casefold(t));
      return yes("proper name '" + t + "'");
    }
  }
  return no("no proper names");
}

Detection detect_domain_specificity(const QueryView& v) {
  static const std::unordered_set<std::string> terms = {
      "pathophysiology", "rhabdomyolysis", "heteroscedasticity", "thermodynamics",
      "entropy",  "crispr", "cas9",   "genome",  "biochemical", "biochemistry",
      "statute",  "tort",   "gdpr",   "amortization", "convolution",
      "eigenvalue", "quantum", "decoherence", "mitosis", "photosynthesis",
      "polymerase", "reactant", "regulators"};
  for (const auto& t : v.toks) {
    std::string base = strip_possessive(t);
    if (base == "crispr-cas9") return yes("specialized term 'CRISPR-Cas9'");
    if (terms.count(base)) return yes("specialized term '" + base + "'");
  }
  static const std::regex section_re("\\bsection \\d+\\b");
  if (std::regex_search(v.folded, section_re)) return yes("statutory reference");
  if (has_phrase(v, "type i ") || has_phrase(v, "type ii "))
    return yes("statistical term of art");
  return no("general-knowledge vocabulary");
}

Detection detect_scenario_mismatch(const QueryView& v, Scenario scenario) {
  static const char* mc_like[] = {"choose the correct option", "select the best answer",
                                  "pick the option", "pick an option",
                                  "from the choices", "(a-d)"};
  static const char* extractive_like[] = {"extract the exact span", "extract the span",
                                          "exact span"};
  static const char* abstractive_like[] = {"free-form", "in your own words", "essay",
                                           "open-ended"};
  auto any = [&](auto& list) {
    for (const char* p : list)
      if (has_phrase(v, p)) return std::optional<std::string>(p);
    return std::optional<std::string>{};
  };
  switch (scenario) {
    case Scenario::Abstractive:
      if (auto p = any(extractive_like))
        return yes("extraction request '" + *p + "' in an abstractive setting");
      if (auto p = any(mc_like))
        return yes("option-selection request '" + *p + "' without options");
      break;
    case Scenario::MultipleChoice:
      if (auto p = any(abstractive_like))
        return yes("open-ended request '" + *p + "' in a multiple-choice setting");
      if (auto p = any(extractive_like))
        return yes("span request '" + *p + "' without a passage");
      break;
    case Scenario::Extractive:
      if (auto p = any(mc_like))
        return yes("option-selection request '" + *p + "' without options");
      if (auto p = any(abstractive_like))
        return yes("open-ended request '" + *p + "' in an extractive setting");
      break;
  }
  return no("request format matches the scenario");
}

Detection detect_subjectivity(const QueryView& v) {
  static const std::unordered_set<std::string> markers = {"best", "worst", "good",
                                                          "beautiful", "favorite",
                                                          "worth", "opinion"};
  for (const auto& t : v.toks)
    if (markers.count(t)) return yes("value judgment marker '" + t + "'");
  if (has_phrase(v, "should i") || has_phrase(v, "should we"))
    return yes("advisory preference question");
  if (has_phrase(v, "do you think")) return yes("asks for an opinion");
  return no("objective, criteria-based request");
}

Detection detect_answerability(const QueryView& v) {
  if (!v.toks.empty() && v.toks[0] == "will")
    return no("speculative forecast; outcome not yet verifiable");
  static const char* speculative[] = {"do you think", "is there life", "exact number of",
                                      "going to"};
  for (const char* p : speculative)
    if (has_phrase(v, p)) return no(std::string("unverifiable: '") + p + "'");
  if (has_phrase(v, "should i") || has_phrase(v, "should we"))
    return no("subjective; no verification criteria");
  for (const auto& t : v.toks)
    if (t == "predict" || t == "forecast")
      return no("requires forecasting, not established fact");
  return yes("verifiable answer from supplied or well-known facts");
}

Detection detect_intention_grounding(const QueryView& v) {
  static const char* vague_openers[] = {"tell me about", "talk about", "what about",
                                        "tell me something", "what happened"};
  for (const char* p : vague_openers)
    if (has_phrase(v, p)) return no(std::string("vague goal: '") + p + "'");
  static const std::unordered_set<std::string> verbs = {
      "summarize", "compare", "extract",  "classify", "translate", "list",
      "define",    "explain", "describe", "identify", "verify",    "state",
      "name",      "compute", "calculate", "give",    "report",    "select",
      "choose",    "pick",    "answer",   "interpret", "differentiate"};
  static const std::unordered_set<std::string> wh = {"who", "what", "when", "where",
                                                     "which", "why", "how", "is",
                                                     "are", "was", "were", "did",
                                                     "does", "do"};
  if (!v.toks.empty()) {
    if (verbs.count(v.toks[0]))
      return yes("operation verb '" + v.toks[0] + "' states the intent");
    if (wh.count(v.toks[0])) return yes("direct question form makes the goal clear");
  }
  return no("no explicit operation or question form");
}

}  // namespace

Detection RuleBasedDetector::detect(FeatureName feature, const Query& query) {
  QueryView v = make_view(query.text);
  switch (feature) {
    case FeatureName::LackOfSpecificity: return detect_lack_of_specificity(v);
    case FeatureName::ClauseComplexity: {
      int clauses = count_clauses(query.text);
      if (clauses >= 2)
        return yes("contains " + std::to_string(clauses - 1) + " subordinate clause(s)");
      return no("single simple clause");
    }
    case FeatureName::NegationUsage: return detect_negation(v);
    case FeatureName::ExcessiveDetails: return detect_excessive_details(v);
    case FeatureName::AnaphoraUsage: return detect_anaphora(v);
    case FeatureName::PolysemousWords: return detect_polysemy(v);
    case FeatureName::RareWordUsage: return detect_rare_words(v);
    case FeatureName::PragmaticFeatures: return detect_pragmatics(v);
    case FeatureName::Presupposition: return detect_presupposition(v);
    case FeatureName::ContextualConstraints: return detect_contextual_constraints(v);
    case FeatureName::NamedEntitiesPresent: return detect_named_entities(v);
    case FeatureName::DomainSpecificity: return detect_domain_specificity(v);
    case FeatureName::QueryScenarioMismatch:
      return detect_scenario_mismatch(v, query.scenario);
    case FeatureName::SuperlativeUsage: return detect_superlative(v);
    case FeatureName::IntentionGrounding: return detect_intention_grounding(v);
    case FeatureName::Subjectivity: return detect_subjectivity(v);
    case FeatureName::Answerability: return detect_answerability(v);
    default:
      throw ValidationError(std::string("not a binary feature: ") + to_string(feature));
  }
}

// --- LLM-judge detector ---------------------------------------------------------------

std::optional<Detection> parse_detection(const std::string& raw) {
  std::string folded = casefold(raw);
  size_t pos = folded.find("label=");
  if (pos == std::string::npos) return std::nullopt;
  size_t val = pos + 6;
  while (val < folded.size() && (folded[val] == ' ' || folded[val] == '"')) ++val;
  bool label;
  if (folded.compare(val, 4, "true") == 0) {
    label = true;
  } else if (folded.compare(val, 5, "false") == 0) {
    label = false;
  } else {
    return std::nullopt;
  }
  Detection d;
  d.label = label;
  size_t rpos = raw.find("rationale=");
  if (rpos != std::string::npos) {
    std::string rest = raw.substr(rpos + 10);
    size_t q0 = rest.find('"');
    if (q0 != std::string::npos) {
      size_t q1 = rest.find('"', q0 + 1);
      d.rationale = (q1 == std::string::npos) ? rest.substr(q0 + 1)
                                              : rest.substr(q0 + 1, q1 - q0 - 1);
    } else {
      d.rationale = rest;
    }
  }
  return d;
}

LlmJudgeDetector::LlmJudgeDetector(std::shared_ptr<CompletionProvider> provider,
                                   ProviderConfig cfg)
    : provider_(std::move(provider)), cfg_(std::move(cfg)) {}

Detection LlmJudgeDetector::detect(FeatureName feature, const Query& query) {
  const std::string prompt = detector_prompt(feature, query.text, query.scenario);
  std::string raw = provider_->complete(prompt, 0);
  if (auto d = parse_detection(raw)) return *d;
  // one repair retry: re-prompt, quoting the malformed reply
  std::string repair = prompt +
                       "\n\nYour previous reply could not be parsed:\n" + raw +
                       "\nReply again using exactly: label=<true|false>; rationale=\"...\"";
  raw = provider_->complete(repair, 1);
  if (auto d = parse_detection(raw)) return *d;
  throw ProviderError("unparseable detector output for " +
                      std::string(to_string(feature)) + ": " + raw);
}

// --- extraction -------------------------------------------------------------------------

FeatureVector extract_features(const Query& query, DetectorBackend& backend,
                               const ExtractionOptions& opts) {
  FeatureVector fv;
  fv.query_id = query.id;
  for (FeatureName f : binary_feature_names()) {
    Detection d = backend.detect(f, query);
    fv.binary[feature_index(f)] = d.label ? 1 : 0;
    fv.rationales[feature_index(f)] = std::move(d.rationale);
  }

  auto set_numeric = [&](FeatureName f, int value, std::string why) {
    fv.numeric_raw[feature_index(f) - kNumBinaryFeatures] = value;
    fv.rationales[feature_index(f)] = std::move(why);
  };

  if (query.n_tokens)
    set_numeric(FeatureName::QueryTokenLength, *query.n_tokens, "precomputed column");
  else
    set_numeric(FeatureName::QueryTokenLength, count_tokens(query.text, opts.tokenizer),
                "tokenizer count");

  if (query.n_clauses)
    set_numeric(FeatureName::NumberOfClauses, *query.n_clauses, "precomputed column");
  else
    set_numeric(FeatureName::NumberOfClauses, count_clauses(query.text),
                "baseline clause counter");

  if (query.dep_depth && query.parse_height) {
    set_numeric(FeatureName::DependencyDepth, *query.dep_depth, "precomputed column");
    set_numeric(FeatureName::ParseTreeHeight, *query.parse_height, "precomputed column");
  } else {
    SyntaxAnnotations ann = opts.syntax(query.text);
    set_numeric(FeatureName::DependencyDepth,
                query.dep_depth.value_or(ann.dep_depth),
                query.dep_depth ? "precomputed column" : "baseline syntax heuristic");
    set_numeric(FeatureName::ParseTreeHeight,
                query.parse_height.value_or(ann.parse_height),
                query.parse_height ? "precomputed column" : "baseline syntax heuristic");
  }
  return fv;
}

// --- standardization -----------------------------------------------------------------------

NumericStats compute_numeric_stats(const std::vector<FeatureVector>& corpus_features) {
  if (corpus_features.empty())
    throw ValidationError("cannot compute numeric stats on an empty feature list");
  NumericStats stats;
  const double n = static_cast<double>(corpus_features.size());
  for (int k = 0; k < kNumNumericFeatures; ++k) {
    double sum = 0.0;
    for (const auto& fv : corpus_features) sum += fv.numeric_raw[k];
    stats.mean[k] = sum / n;
    double ss = 0.0;
    for (const auto& fv : corpus_features) {
      double d = fv.numeric_raw[k] - stats.mean[k];
      ss += d * d;
    }
    stats.stddev[k] = std::sqrt(ss / n);
  }
  return stats;
}

void apply_numeric_stats(std::vector<FeatureVector>& features, const NumericStats& stats) {
  for (auto& fv : features)
    for (int k = 0; k < kNumNumericFeatures; ++k)
      fv.numeric_scaled[k] = stats.stddev[k] == 0.0
                                 ? 0.0
                                 : (fv.numeric_raw[k] - stats.mean[k]) / stats.stddev[k];
}

std::vector<FeatureVector> scale_numeric(std::vector<FeatureVector> corpus_features) {
  NumericStats stats = compute_numeric_stats(corpus_features);
  apply_numeric_stats(corpus_features, stats);
  return corpus_features;
}

// --- persistence ------------------------------------------------------------------------------

void save_features(const std::vector<FeatureVector>& features, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write features file: " + path);
  for (const auto& fv : features) {
    json j;
    j["query_id"] = fv.query_id;
    json b = json::object();
    json r = json::object();
    for (FeatureName f : binary_feature_names()) {
      b[to_string(f)] = fv.binary_at(f);
      r[to_string(f)] = fv.rationale_at(f);
    }
    json n = json::object();
    for (FeatureName f : numeric_feature_names()) {
      n[to_string(f)] = fv.raw_at(f);
      r[to_string(f)] = fv.rationale_at(f);
    }
    j["binary"] = std::move(b);
    j["numeric_raw"] = std::move(n);
    j["rationales"] = std::move(r);
    out << j.dump() << "\n";
  }
}

std::vector<FeatureVector> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open features file: " + path);
  std::vector<FeatureVector> out;
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
    FeatureVector fv;
    fv.query_id = j.at("query_id").get<std::string>();
    for (FeatureName f : binary_feature_names()) {
      int v = j.at("binary").at(to_string(f)).get<int>();
      if (v != 0 && v != 1)
        throw ValidationError("line " + std::to_string(line_no) +
                              ": binary feature out of {0,1}");
      fv.binary[feature_index(f)] = v;
    }
    for (FeatureName f : numeric_feature_names()) {
      int v = j.at("numeric_raw").at(to_string(f)).get<int>();
      if (v < 0)
        throw ValidationError("line " + std::to_string(line_no) +
                              ": negative numeric feature");
      fv.numeric_raw[feature_index(f) - kNumBinaryFeatures] = v;
    }
    if (j.contains("rationales"))
      for (auto& [k, val] : j.at("rationales").items())
        fv.rationales[feature_index(feature_from_string(k))] = val.get<std::string>();
    out.push_back(std::move(fv));
  }
  return out;
}

std::map<FeatureName, double> detector_accuracy(const std::vector<LabeledCase>& cases,
                                                DetectorBackend& backend) {
  std::map<FeatureName, std::pair<int, int>> tally;  // feature -> (correct, total)
  for (const auto& c : cases) {
    Detection d = backend.detect(c.feature, c.query);
    auto& [correct, total] = tally[c.feature];
    if (d.label == c.expected) ++correct;
    ++total;
  }
  std::map<FeatureName, double> out;
  for (auto& [f, ct] : tally) out[f] = static_cast<double>(ct.first) / ct.second;
  return out;
}

}  // namespace qrisk
