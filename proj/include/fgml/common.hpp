#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fgml {

// ---------------------------------------------------------------------------
// Errors

struct SyntaxError : std::runtime_error {
  int line;
  int col;
  SyntaxError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line),
        col(col) {}
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuildError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RootKindError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IneligibleRootError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorpusTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyCorpus : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a, 64-bit)

inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a(s.data(), s.size(), h);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

// ---------------------------------------------------------------------------
// Deterministic RNG: xoshiro256++ seeded with splitmix64. The standard
// <random> distributions are not bit-stable across implementations, so all
// sampling goes through this.

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : s_) {
      x = splitmix64(x);
      w = x;
    }
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Unbiased integer in [0, bound).
  uint64_t below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t threshold = -bound % bound;
    for (;;) {
      uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Inclusive range.
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Uniform in [0, 1) with 53 random bits.
  double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller, one cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = real();
    double u2 = real();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double two_pi_u2 = 6.283185307179586476925286766559 * u2;
    spare_ = mag * std::sin(two_pi_u2);
    has_spare_ = true;
    return mag * std::cos(two_pi_u2);
  }

  bool chance(double p) { return real() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Compact bit vector used for analysis label sets and dataflow facts.

class BitVec {
 public:
  BitVec() = default;
  explicit BitVec(size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  size_t size() const { return n_; }

  bool get(size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1; }
  void set(size_t i, bool v = true) {
    if (v)
      w_[i >> 6] |= (1ull << (i & 63));
    else
      w_[i >> 6] &= ~(1ull << (i & 63));
  }

  void clear() { std::fill(w_.begin(), w_.end(), 0); }
  void fill_all() {
    std::fill(w_.begin(), w_.end(), ~0ull);
    trim();
  }

  size_t count() const {
    size_t c = 0;
    for (uint64_t w : w_) c += static_cast<size_t>(__builtin_popcountll(w));
    return c;
  }

  // Returns true if this changed.
  bool or_with(const BitVec& o) {
    uint64_t diff = 0;
    for (size_t i = 0; i < w_.size(); ++i) {
      uint64_t nw = w_[i] | o.w_[i];
      diff |= nw ^ w_[i];
      w_[i] = nw;
    }
    return diff != 0;
  }

  bool and_with(const BitVec& o) {
    uint64_t diff = 0;
    for (size_t i = 0; i < w_.size(); ++i) {
      uint64_t nw = w_[i] & o.w_[i];
      diff |= nw ^ w_[i];
      w_[i] = nw;
    }
    return diff != 0;
  }

  void subtract(const BitVec& o) {
    for (size_t i = 0; i < w_.size(); ++i) w_[i] &= ~o.w_[i];
  }

  bool operator==(const BitVec& o) const { return n_ == o.n_ && w_ == o.w_; }

  std::vector<int32_t> ones() const {
    std::vector<int32_t> out;
    for (size_t i = 0; i < n_; ++i)
      if (get(i)) out.push_back(static_cast<int32_t>(i));
    return out;
  }

 private:
  void trim() {
    if (n_ & 63) w_.back() &= (1ull << (n_ & 63)) - 1;
  }

  size_t n_ = 0;
  std::vector<uint64_t> w_;
};

}  // namespace fgml
