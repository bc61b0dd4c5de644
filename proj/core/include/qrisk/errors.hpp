#pragma once

#include <stdexcept>
#include <string>

namespace qrisk {

// Bad inputs: malformed files, violated invariants, dimension mismatches.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Upstream provider failures: HTTP errors, exhausted retries, cache misses
// in strict replay, unparseable structured output. CLI exit code 3.
class ProviderError : public std::runtime_error {
 public:
  explicit ProviderError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qrisk
