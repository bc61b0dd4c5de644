#include "qrisk/synth.hpp"

#include <random>
#include <string>

#include "qrisk/hashing.hpp"

namespace qrisk {

namespace {

struct Toggles {
  bool los, cc, ans, ig;  // the four headline effects, iid fair coins
  bool neg, anaph, poly, rare, presup, ctx, domain, subj, prag, excess, superl, ne, qsm;
  int extra_clauses;  // clause-count variation within cc=1
};

Toggles draw_toggles(std::mt19937_64& rng) {
  auto coin = [&](double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  };
  Toggles t;
  t.los = coin(0.5);
  t.cc = coin(0.5);
  t.ans = coin(0.5);
  t.ig = coin(0.5);
  t.neg = coin(0.20);
  t.anaph = coin(0.20);
  t.poly = coin(0.20);
  t.rare = coin(0.15);
  t.presup = coin(0.20);
  t.ctx = coin(0.25);
  t.domain = coin(0.20);
  t.subj = coin(0.15);
  t.prag = coin(0.15);
  t.excess = coin(0.12);
  t.superl = coin(0.15);
  t.ne = coin(0.25);
  t.qsm = coin(0.15);
  t.extra_clauses = coin(0.5) ? 1 : 0;
  return t;
}

}  // namespace

Corpus make_synthetic_corpus(int n, uint64_t seed) {
  static const char* adjectives[] = {"northern", "coastal", "alpine",
                                     "harbor",   "central", "eastern"};
  static const char* clause_segments[] = {
      ", although the index shifted",
      ", because the ledger rolled over",
      ", while the registry was rebuilt",
  };

  Corpus corpus;
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(i)));
    Toggles t = draw_toggles(rng);

    const int route = 1000 + i;
    const std::string route_str = std::to_string(route);
    Scenario scenario = static_cast<Scenario>(i % 3);
    const std::string dataset =
        std::string("synth") + static_cast<char>('A' + (i / 3) % 3);

    std::string adj = t.ne ? "Meridian"
                           : adjectives[std::uniform_int_distribution<int>(0, 5)(rng)];

    // opener fixes IntentionGrounding and Answerability; punctuation comes last
    std::string body;
    char punct;
    if (t.ans && t.ig) {
      body = "Which waypoint is listed for route " + route_str + " in the " + adj +
             " registry";
      punct = '?';
    } else if (t.ans && !t.ig) {
      body = "The waypoint listed for route " + route_str + " in the " + adj +
             " registry";
      punct = '.';
    } else if (!t.ans && t.ig) {
      body = "Will the waypoint listed for route " + route_str + " in the " + adj +
             " registry be different next month";
      punct = '?';
    } else {
      body = "Route " + route_str + " waypoint next month in the " + adj +
             " registry, possibly different";
      punct = '.';
    }

    if (t.neg) body += " without retired entries";
    if (t.anaph) body += " after it was revised";
    if (t.poly) body += " near the bank crossing";
    if (t.rare) body += " including syzygy annotations";
    if (t.presup) body += " again";
    if (t.ctx) body += " during 2019";
    if (t.domain) body += " under the amortization schedule";
    if (t.subj) body += " per local opinion";
    if (t.superl) body += " by the largest margin";
    if (t.prag) body += ", really";
    if (t.excess) body += ", and by the way my desk lamp hums";
    if (t.qsm) {
      body += scenario == Scenario::Extractive ? " from the choices" : " as an exact span";
    }
    if (t.cc) {
      body += clause_segments[std::uniform_int_distribution<int>(0, 2)(rng)];
      if (t.extra_clauses) body += " when the season turned";
    }
    if (t.los) body += " and stuff";
    body += punct;

    Query q;
    q.id = "q" + std::to_string(i);
    q.text = body;
    q.scenario = scenario;
    q.dataset = dataset;
    q.gold = std::vector<std::string>{"waypoint-" + route_str};
    if (scenario == Scenario::MultipleChoice)
      q.choices = std::vector<std::string>{"waypoint-" + route_str, "detour-" + route_str,
                                           "bypass-" + route_str, "spur-" + route_str};
    if (scenario == Scenario::Extractive)
      q.context = "Registry extract: route " + route_str + " is assigned waypoint-" +
                  route_str + ".";

    corpus.datasets.insert(q.dataset);
    corpus.scenarios.insert(q.scenario);
    corpus.queries.push_back(std::move(q));
  }
  return corpus;
}

}  // namespace qrisk
