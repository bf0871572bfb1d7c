#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovl {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 as convenient.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  static Tensor full(int r, int c, double x) {
    Tensor t(r, c);
    std::fill(t.v.begin(), t.v.end(), x);
    return t;
  }

  static Tensor from(std::initializer_list<std::initializer_list<double>> rows_in) {
    Tensor t(static_cast<int>(rows_in.size()),
             rows_in.size() ? static_cast<int>(rows_in.begin()->size()) : 0);
    int i = 0;
    for (const auto& r : rows_in) {
      if (static_cast<int>(r.size()) != t.cols)
        throw std::invalid_argument("Tensor::from: ragged rows");
      int j = 0;
      for (double x : r) t(i, j++) = x;
      ++i;
    }
    return t;
  }

  static Tensor row(const std::vector<double>& xs) {
    Tensor t(1, static_cast<int>(xs.size()));
    t.v = xs;
    return t;
  }

  double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double frob_norm() const {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
};

// Deterministic RNG. The engine is std::mt19937_64 (fully specified by the
// standard); the value mappings below are pinned here instead of using
// std::*_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t raw() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n <= 0");
    return static_cast<int>((static_cast<unsigned __int128>(eng_()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (int i = static_cast<int>(xs.size()) - 1; i > 0; --i)
      std::swap(xs[i], xs[uniform_int(i + 1)]);
  }

  // k distinct indices from [0, n), order randomized.
  std::vector<int> sample_without_replacement(int n, int k);

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 eng_;
};

Tensor randn(int r, int c, double sigma, Rng& rng);

// FNV-1a, used to derive per-video render seeds from string ids.
uint64_t fnv1a(const std::string& s);

}  // namespace ovl
