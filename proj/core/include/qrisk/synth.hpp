#pragma once

#include <cstdint>

#include "qrisk/corpus.hpp"

namespace qrisk {

// Deterministic synthetic QA corpus over three datasets and all three
// scenarios. Query texts toggle the rule-based risk features independently,
// so underspecified/complex phrasings draw higher wrongness from the
// scripted answerer while grounded/answerable ones stay safe.
Corpus make_synthetic_corpus(int n, uint64_t seed);

}  // namespace qrisk
