#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gadst {

// mt19937_64 with hand-mapped draws. The standard pins the raw engine output
// but not the distributions, so all mappings are done here to keep runs
// byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  uint64_t below(uint64_t n) { return eng_() % n; }

  // Knuth multiplication method; fine for the small means used here.
  int poisson(double mean) {
    if (mean <= 0) return 0;
    double limit = std::exp(-mean), prod = uniform();
    int k = 0;
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

// Stable per-purpose sub-seed derivation.
inline uint64_t subseed(uint64_t master, uint64_t purpose) {
  uint64_t x = master * 0x9e3779b97f4a7c15ULL + purpose;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace gadst
