#include "qrisk/hashing.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <stdexcept>
#include <vector>

namespace qrisk {

namespace {

std::string to_hex(const unsigned char* digest, unsigned len) {
  static const char* hexd = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hexd[digest[i] >> 4]);
    out.push_back(hexd[digest[i] & 0xF]);
  }
  return out;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 digest failed");
  return to_hex(digest, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file for hashing: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(buf);
}

uint64_t mix_seed(uint64_t seed, std::string_view label) {
  uint64_t h = splitmix64(seed);
  for (char c : label) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return h;
}

uint64_t mix_seed(uint64_t seed, uint64_t value) {
  return splitmix64(splitmix64(seed) ^ value);
}

}  // namespace qrisk
