#ifndef MOCOLL_RNG_HPP
#define MOCOLL_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mocoll {

// Deterministic randomness. std::mt19937_64 raw output is pinned by the
// standard; the distribution helpers here are ours so that streams are
// identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Unbiased integer in [0, n) via rejection sampling.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double real01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices in [0, n), order random. k is clamped to n.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    if (k > n) k = n;
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + static_cast<size_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::mt19937_64 eng_;
};

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Order-independent per-key randomness: the same (seed, a, b) always maps to
// the same value regardless of when or on which thread it is evaluated.
inline double hash_real01(uint64_t seed, std::string_view a, std::string_view b) {
  uint64_t h = mix64(seed ^ fnv1a(a));
  h = mix64(h ^ fnv1a(b));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace mocoll

#endif  // MOCOLL_RNG_HPP
