#include "qrisk/mockmodel.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "qrisk/features.hpp"
#include "qrisk/hashing.hpp"
#include "qrisk/text.hpp"

namespace qrisk {

namespace {

// uniform in [0,1) from (seed, salt)
double unit_draw(uint64_t seed, const std::string& salt) {
  return static_cast<double>(mix_seed(seed, salt) >> 11) * 0x1p-53;
}

std::string slice_between(const std::string& s, const std::string& from,
                          const std::string& to) {
  size_t b = s.find(from);
  if (b == std::string::npos) return {};
  b += from.size();
  size_t e = s.find(to, b);
  if (e == std::string::npos) return s.substr(b);
  return s.substr(b, e - b);
}

std::string strip_ws(std::string s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  size_t e = s.find_last_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, e - b + 1);
}

// casefold + drop edge punctuation per token, for lenient answer matching
std::string match_key(const std::string& s) {
  std::string out;
  for (const auto& tok : content_tokens(s)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

std::string handle_paraphrase(const std::string& prompt, uint64_t seed) {
  std::string query = strip_ws(slice_between(prompt, "INPUT:\n", "\n\nSTRUCTURED OUTPUT:"));
  static const char* suffixes[] = {"Thanks.", "Please.", "Promptly.",
                                   "Today.",  "Soon.",   "Carefully."};
  uint64_t variant = mix_seed(seed, "variant") % 7;
  std::string text;
  if (variant == 6) {
    text = "unrelated placeholder text entirely";  // should fail the gate
  } else {
    text = query + " " + suffixes[variant];
  }
  return "paraphrase=\"" + text + "\"";
}

std::string handle_answer(const std::string& prompt, uint64_t seed) {
  std::string question = strip_ws(slice_between(prompt, "\nQuestion: ", "\nAnswer:"));
  static const std::regex route_re("route\\s+(\\d+)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(question, m, route_re)) return "unknown";
  const std::string digits = m[1].str();
  double p_wrong = scripted_wrongness(question);
  bool wrong = unit_draw(seed, prompt) < p_wrong;
  return (wrong ? "detour-" : "waypoint-") + digits;
}

std::string handle_judge(const std::string& prompt) {
  std::string block = prompt.substr(prompt.rfind("Now grade the following example."));
  std::string answer = strip_ws(slice_between(block, "model_answer: ", "\n"));
  std::string gold = strip_ws(slice_between(block, "gold: ", "\n"));

  std::vector<std::string> members;
  if (!gold.empty() && gold.front() == '{' && gold.back() == '}') {
    std::string inner = gold.substr(1, gold.size() - 2);
    size_t pos = 0;
    while (pos != std::string::npos) {
      size_t comma = inner.find(',', pos);
      std::string item = comma == std::string::npos ? inner.substr(pos)
                                                    : inner.substr(pos, comma - pos);
      item = strip_ws(item);
      if (!item.empty() && item != "...") members.push_back(item);
      pos = comma == std::string::npos ? std::string::npos : comma + 1;
    }
  } else {
    members.push_back(gold);
  }

  std::string key = match_key(answer);
  bool correct = false;
  for (const auto& g : members)
    if (!key.empty() && key == match_key(g)) correct = true;
  if (correct)
    return "correct=true; rationale=\"Matches the reference answer.\"";
  return "correct=false; rationale=\"Does not match any acceptable reference.\"";
}

std::string handle_detector(const std::string& prompt) {
  std::string feature_name = strip_ws(slice_between(prompt, "FEATURE: ", "\n"));
  FeatureName feature = feature_from_string(feature_name);

  size_t mark = prompt.find("Now classify the following query.\n\nINPUT:\n");
  std::string input = prompt.substr(mark + std::string("Now classify the following query.\n\nINPUT:\n").size());
  size_t end = input.find("\n\nSTRUCTURED OUTPUT:");
  if (end != std::string::npos) input = input.substr(0, end);

  Query q;
  q.id = "detector-input";
  q.scenario = Scenario::Abstractive;
  if (input.rfind("SCENARIO: ", 0) == 0) {
    size_t nl = input.find('\n');
    std::string scen = strip_ws(input.substr(10, nl - 10));
    if (scen == "Extractive") q.scenario = Scenario::Extractive;
    else if (scen == "Multiple-Choice") q.scenario = Scenario::MultipleChoice;
    input = nl == std::string::npos ? "" : input.substr(nl + 1);
  }
  q.text = strip_ws(input);
  if (q.text.empty()) q.text = "?";

  RuleBasedDetector rules;
  Detection d = rules.detect(feature, q);
  return std::string("label=") + (d.label ? "true" : "false") + "; rationale=\"" +
         d.rationale + "\"";
}

}  // namespace

double scripted_wrongness(const std::string& question) {
  Query q;
  q.id = "scripted";
  q.text = question;
  q.scenario = Scenario::Abstractive;
  RuleBasedDetector rules;
  auto on = [&](FeatureName f) { return rules.detect(f, q).label ? 1.0 : 0.0; };

  int clauses = count_clauses(question);
  double p = 0.45;
  p += 0.30 * on(FeatureName::LackOfSpecificity);
  p += 0.24 * on(FeatureName::ClauseComplexity);
  p -= 0.26 * on(FeatureName::Answerability);
  p -= 0.20 * on(FeatureName::IntentionGrounding);
  p += 0.03 * on(FeatureName::NegationUsage);
  p += 0.02 * on(FeatureName::AnaphoraUsage);
  p += 0.015 * std::min(3, std::max(0, clauses - 1));
  return std::clamp(p, 0.02, 0.98);
}

std::string ScriptedCompletion::complete(const std::string& prompt, uint64_t sample_seed) {
  if (prompt.rfind("You are a careful rewriter.", 0) == 0)
    return handle_paraphrase(prompt, sample_seed);
  if (prompt.rfind("Answer the question concisely.", 0) == 0)
    return handle_answer(prompt, sample_seed);
  if (prompt.rfind("You are an impartial grader.", 0) == 0) return handle_judge(prompt);
  if (prompt.rfind("You are an expert linguist.", 0) == 0) return handle_detector(prompt);
  return "ok";
}

}  // namespace qrisk
