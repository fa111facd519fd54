#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "branchtail/pmf.hpp"

namespace branchtail {

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Per-replicate random stream: a SplitMix64 sequence whose initial state is an
// avalanche mix of (master_seed, stream_id). Partitioning replicates across
// workers cannot change any stream's output.
class Stream {
 public:
  Stream(std::uint64_t master_seed, std::uint64_t stream_id)
      : state_(mix64(master_seed ^ mix64(stream_id ^ 0x6A09E667F3BCC909ull))) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform on [0,1), 53 bits
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform on (0,1]; safe as a log() argument
  double next_unit_pos() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Small per-replicate bit reservoir for run-length sampling.
struct BitBuf {
  std::uint64_t bits = 0;
  int avail = 0;
};

// Draws from a Pmf. Finite supports use a cumulative threshold scan on one
// 64-bit variate. Fractional-linear laws draw 1 + Geometric(1/m):
//   m == 2      run of fair bits (countr_zero on a buffered word),
//   m <= 16     Bernoulli chain, expected m words,
//   otherwise   inversion with one log per draw.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const Pmf& pmf) {
    if (pmf.is_fractional_linear()) {
      const double m = pmf.fl_mean();
      if (m == 2.0) {
        kind_ = Kind::fair_bit_run;
      } else if (m <= 16.0) {
        kind_ = Kind::chain;
        chain_threshold_ = scale_to_u64(1.0 / m);
      } else {
        kind_ = Kind::log_inversion;
        log_q_ = std::log((m - 1.0) / m);
      }
      return;
    }
    kind_ = Kind::finite;
    double cum = 0.0;
    for (const Pmf::Atom& a : pmf.atoms()) {
      cum += a.second;
      thresholds_.push_back(scale_to_u64(cum));
      values_.push_back(a.first);
    }
    thresholds_.back() = ~0ull;
  }

  // partial sum carried by the cap-exceeded signal; callers attach the path
  struct CapExceeded {
    std::uint64_t partial;
  };

  std::uint64_t draw(Stream& rng, BitBuf& bb) const {
    switch (kind_) {
      case Kind::finite: {
        const std::uint64_t u = rng.next_u64();
        std::size_t i = 0;
        while (i + 1 < thresholds_.size() && u >= thresholds_[i]) ++i;
        return values_[i];
      }
      case Kind::fair_bit_run: {
        // 1 + number of zero bits before the first one bit
        std::uint64_t k = 1;
        for (;;) {
          if (bb.avail == 0) {
            bb.bits = rng.next_u64();
            bb.avail = 64;
          }
          const int tz = std::countr_zero(bb.bits);
          if (tz >= bb.avail) {
            k += std::uint64_t(bb.avail);
            bb.avail = 0;
            bb.bits = 0;
            continue;
          }
          k += std::uint64_t(tz);
          bb.bits >>= (tz + 1);
          bb.avail -= tz + 1;
          return k;
        }
      }
      case Kind::chain: {
        std::uint64_t k = 1;
        while (rng.next_u64() >= chain_threshold_) ++k;
        return k;
      }
      case Kind::log_inversion: {
        const double u = rng.next_unit_pos();
        const double g = std::floor(std::log(u) / log_q_);
        return 1 + std::uint64_t(g < 0.0 ? 0.0 : g);
      }
    }
    return 0;  // unreachable
  }

  // Sum of z independent draws, consuming the stream exactly as z calls to
  // draw() would (same bits in the same order, so results are bit-identical).
  // The fair-bit-run case walks the stream a word at a time: z draws sum to
  // z plus the number of zero bits seen before the z-th one bit. Throws
  // CapExceeded once the running sum passes `cap`.
  std::uint64_t sum_draws(std::uint64_t z, Stream& rng, BitBuf& bb, std::uint64_t cap) const {
    switch (kind_) {
      case Kind::finite: {
        std::uint64_t next = 0;
        if (thresholds_.size() == 2) {
          const std::uint64_t t0 = thresholds_[0];
          const std::uint64_t v0 = values_[0];
          const std::uint64_t dv = values_[1] - values_[0];
          for (std::uint64_t i = 0; i < z; ++i) {
            next += v0 + (rng.next_u64() >= t0 ? dv : 0);
            if (next > cap) throw CapExceeded{next};
          }
          return next;
        }
        const std::uint64_t* th = thresholds_.data();
        const std::uint64_t* vals = values_.data();
        const std::size_t nt = thresholds_.size();
        for (std::uint64_t i = 0; i < z; ++i) {
          const std::uint64_t u = rng.next_u64();
          std::size_t j = 0;
          while (j + 1 < nt && u >= th[j]) ++j;
          next += vals[j];
          if (next > cap) throw CapExceeded{next};
        }
        return next;
      }
      case Kind::fair_bit_run: {
        std::uint64_t total = z;  // the "+1" of every draw
        if (total > cap) throw CapExceeded{total};
        std::uint64_t ones_needed = z;
        while (ones_needed > 0) {
          if (bb.avail == 0) {
            bb.bits = rng.next_u64();
            bb.avail = 64;
          }
          const std::uint64_t w = bb.bits;  // high bits beyond avail are zero
          const std::uint64_t c = std::uint64_t(std::popcount(w));
          if (c < ones_needed) {
            total += std::uint64_t(bb.avail) - c;
            ones_needed -= c;
            bb.bits = 0;
            bb.avail = 0;
          } else {
            std::uint64_t ww = w;
            for (std::uint64_t k = 1; k < ones_needed; ++k) ww &= ww - 1;
            const int p = std::countr_zero(ww);  // position of the ones_needed-th set bit
            total += std::uint64_t(p) + 1 - ones_needed;
            bb.bits = p + 1 >= 64 ? 0 : w >> (p + 1);
            bb.avail -= p + 1;
            ones_needed = 0;
          }
          if (total > cap) throw CapExceeded{total};
        }
        return total;
      }
      case Kind::chain:
      case Kind::log_inversion: {
        std::uint64_t next = 0;
        for (std::uint64_t i = 0; i < z; ++i) {
          next += draw(rng, bb);
          if (next > cap) throw CapExceeded{next};
        }
        return next;
      }
    }
    return 0;  // unreachable
  }

 private:
  enum class Kind { finite, fair_bit_run, chain, log_inversion };

  static std::uint64_t scale_to_u64(double p) {
    const long double s = (long double)(p) * 18446744073709551616.0L;
    if (s >= 18446744073709551615.0L) return ~0ull;
    if (s <= 0.0L) return 0;
    return (std::uint64_t)(s);
  }

  Kind kind_ = Kind::finite;
  std::vector<std::uint64_t> thresholds_;  // cumulative, scaled to 2^64
  std::vector<std::uint64_t> values_;
  std::uint64_t chain_threshold_ = 0;
  double log_q_ = 0.0;
};

}  // namespace branchtail
