#include "ovl/tensor.hpp"

#include <sstream>

namespace ovl {

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  // Partial Fisher-Yates: first k entries are the sample.
  for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_int(n - i)]);
  pool.resize(k);
  return pool;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << eng_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> eng_;
  if (is.fail()) throw std::runtime_error("Rng::set_state: malformed state string");
}

Tensor randn(int r, int c, double sigma, Rng& rng) {
  Tensor t(r, c);
  for (double& x : t.v) x = rng.normal(0.0, sigma);
  return t;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ovl
