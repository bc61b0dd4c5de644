// Writes the bundled synthetic corpus used by the offline demo and tests.

#include <CLI11.hpp>

#include <cstdio>

#include "qrisk/corpus.hpp"
#include "qrisk/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a synthetic risk-feature corpus"};
  int n = 300;
  uint64_t seed = 42;
  std::string out = "synthetic_corpus.jsonl";
  app.add_option("--n", n, "number of queries");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--out", out, "output JSONL path");
  CLI11_PARSE(app, argc, argv);

  qrisk::Corpus corpus = qrisk::make_synthetic_corpus(n, seed);
  qrisk::save_corpus(corpus, out);
  std::printf("wrote %zu queries -> %s\n", corpus.queries.size(), out.c_str());
  return 0;
}
