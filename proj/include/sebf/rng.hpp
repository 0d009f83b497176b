#pragma once

#include <array>
#include <cstdint>
#include <cmath>

namespace sebf {

double normal_quantile(double p);  // stable_math.cpp

/// Counter-based generator (Philox4x32-10). A stream is a (key, counter)
/// pair; streams for distinct keys are independent, so chain (k,l) at time t
/// can draw from a stream keyed on (master seed, k, l, t) regardless of the
/// thread it runs on. State is 4 words of counter plus a 2-word key, which
/// makes checkpointing trivial.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(std::uint64_t key) : key_lo_(static_cast<std::uint32_t>(key)),
                                    key_hi_(static_cast<std::uint32_t>(key >> 32)),
                                    counter_{0, 0, 0, 0}, buf_pos_(4) {}

  /// Stream for a (master seed, k, l, t) work unit. The mix is splitmix64
  /// over the four words, so nearby keys land on unrelated streams.
  static Rng keyed(std::uint64_t seed, std::uint64_t k, std::uint64_t l,
                   std::uint64_t t) {
    std::uint64_t h = seed;
    h = splitmix(h ^ (0x9e3779b97f4a7c15ULL + k));
    h = splitmix(h ^ (0xbf58476d1ce4e5b9ULL + l));
    h = splitmix(h ^ (0x94d049bb133111ebULL + t));
    return Rng(h);
  }

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on (0,1); never returns 0 or 1.
  double uniform() {
    // 53-bit mantissa from one u64 draw, offset to the open interval.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via the inverse cdf; deterministic across platforms.
  double normal() { return normal_quantile(uniform()); }

  /// Uniform integer in {0, 1, ..., n-1}.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo of a 64-bit draw; bias is < 2^-53 for the n used
    // here (chain populations, particle counts).
    return next_u64() % n;
  }

  double gamma(double shape);                   // rng.cpp
  double inverse_gamma(double shape, double rate) {
    return rate / gamma(shape);
  }
  long poisson(double mean);                    // rng.cpp

  // Serialization for checkpoints.
  std::array<std::uint32_t, 7> pack() const {
    return {key_lo_, key_hi_, counter_[0], counter_[1], counter_[2],
            counter_[3], static_cast<std::uint32_t>(buf_pos_)};
  }
  static Rng unpack(const std::array<std::uint32_t, 7>& s) {
    Rng r;
    r.key_lo_ = s[0];
    r.key_hi_ = s[1];
    r.counter_ = {s[2], s[3], s[4], s[5]};
    r.buf_pos_ = 4;
    // Regenerate the block the stream was parked in, then skip.
    if (s[6] < 4) {
      // counter_ holds the *next* block index; step back one to refill.
      r.decrement_counter();
      r.refill();
      r.buf_pos_ = s[6];
    }
    return r;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::uint32_t x0 = counter_[0], x1 = counter_[1], x2 = counter_[2],
                  x3 = counter_[3];
    std::uint32_t k0 = key_lo_, k1 = key_hi_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, x0, hi0, lo0);
      mulhilo(0xCD9E8D57u, x2, hi1, lo1);
      x0 = hi1 ^ x1 ^ k0;
      x1 = lo1;
      x2 = hi0 ^ x3 ^ k1;
      x3 = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_ = {x0, x1, x2, x3};
    buf_pos_ = 0;
    increment_counter();
  }

  void increment_counter() {
    for (int i = 0; i < 4; ++i)
      if (++counter_[i] != 0) break;
  }
  void decrement_counter() {
    for (int i = 0; i < 4; ++i)
      if (counter_[i]-- != 0) break;
  }

  std::uint32_t key_lo_, key_hi_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_;
};

}  // namespace sebf
