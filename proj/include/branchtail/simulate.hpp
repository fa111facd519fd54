#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "branchtail/distributions.hpp"
#include "branchtail/rng.hpp"

namespace branchtail {

struct SimConfig {
  std::uint32_t generations = 20;       // truncation depth n
  std::uint64_t replicates = 1;
  std::uint64_t master_seed = 0x9a7d2e5c01b6f384ull;
  std::uint64_t population_cap = 100000000;  // individuals per generation, per replicate
};

struct PathSample {
  std::vector<std::uint64_t> counts;  // Z_0 .. Z_n
  double normalized_limit = 0.0;      // counts[n] / m^n
};

// Raised when a replicate exceeds population_cap; carries the partial path.
class CappedPathError : public std::runtime_error {
 public:
  explicit CappedPathError(PathSample partial)
      : std::runtime_error("population cap exceeded"), partial_(std::move(partial)) {}
  const PathSample& partial() const { return partial_; }

 private:
  PathSample partial_;
};

enum class StartMode { immigrant_start, single_ancestor };

namespace detail {

// Offspring draws are performed individual by individual (no convolution
// shortcuts); the cap check rides along the running sum.
inline std::uint64_t next_generation(std::uint64_t z, const DiscreteSampler& smp, Stream& rng,
                                     BitBuf& bb, std::uint64_t cap,
                                     const std::vector<std::uint64_t>& partial_counts) {
  try {
    return smp.sum_draws(z, rng, bb, cap);
  } catch (const DiscreteSampler::CapExceeded& e) {
    PathSample p;
    p.counts = partial_counts;
    p.counts.push_back(e.partial);
    throw CappedPathError(std::move(p));
  }
}

template <class Fn>
void for_each_replicate(std::uint64_t n, unsigned threads, Fn&& fn) {
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  if (t > n) t = n ? unsigned(std::min<std::uint64_t>(n, 1u << 16)) : 1;
  if (t <= 1) {
    for (std::uint64_t r = 0; r < n; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex err_mu;
  const std::uint64_t chunk = (n + t - 1) / t;
  for (unsigned w = 0; w < t; ++w) {
    const std::uint64_t lo = std::uint64_t(w) * chunk;
    const std::uint64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::uint64_t r = lo; r < hi; ++r) fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// One Galton-Watson path from `start` ancestors, stream 0 of cfg.master_seed.
inline PathSample simulate_gw(const OffspringSpec& off, const SimConfig& cfg,
                              std::uint64_t start) {
  if (start < 1) throw std::invalid_argument("simulate_gw: start must be >= 1");
  const DiscreteSampler smp(off.pmf);
  Stream rng(cfg.master_seed, 0);
  BitBuf bb;
  PathSample out;
  out.counts.reserve(cfg.generations + 1);
  out.counts.push_back(start);
  std::uint64_t z = start;
  for (std::uint32_t g = 0; g < cfg.generations; ++g) {
    z = detail::next_generation(z, smp, rng, bb, cfg.population_cap, out.counts);
    out.counts.push_back(z);
  }
  out.normalized_limit = double(z) / std::pow(off.m, double(cfg.generations));
  return out;
}

// One path with immigration. immigrant_start begins with a Y draw;
// single_ancestor begins with one individual. Every generation then adds an
// independent Y draw on top of the offspring sum.
inline PathSample simulate_gwi(const OffspringSpec& off, const ImmigrationSpec& imm,
                               const SimConfig& cfg, StartMode mode) {
  const DiscreteSampler off_smp(off.pmf);
  const DiscreteSampler imm_smp(imm.pmf);
  Stream rng(cfg.master_seed, 0);
  BitBuf bb;
  PathSample out;
  out.counts.reserve(cfg.generations + 1);
  std::uint64_t z = mode == StartMode::immigrant_start ? imm_smp.draw(rng, bb) : 1;
  out.counts.push_back(z);
  for (std::uint32_t g = 0; g < cfg.generations; ++g) {
    std::uint64_t next =
        detail::next_generation(z, off_smp, rng, bb, cfg.population_cap, out.counts);
    next += imm_smp.draw(rng, bb);
    if (next > cfg.population_cap) {
      PathSample p;
      p.counts = out.counts;
      p.counts.push_back(next);
      throw CappedPathError(std::move(p));
    }
    out.counts.push_back(next);
    z = next;
  }
  out.normalized_limit = double(z) / std::pow(off.m, double(cfg.generations));
  return out;
}

namespace detail {

inline std::uint64_t run_gw_final(std::uint64_t start, std::uint32_t gens,
                                  const DiscreteSampler& smp, Stream& rng, BitBuf& bb,
                                  std::uint64_t cap) {
  std::vector<std::uint64_t> counts;
  counts.push_back(start);
  std::uint64_t z = start;
  for (std::uint32_t g = 0; g < gens; ++g) {
    z = next_generation(z, smp, rng, bb, cap, counts);
    counts.push_back(z);
  }
  return z;
}

}  // namespace detail

// `replicates` independent values of Z_n / m^n starting from one ancestor.
// Replicate r draws from stream r; results are identical for any thread count.
inline std::vector<double> sample_W(const OffspringSpec& off, const SimConfig& cfg,
                                    unsigned threads = 0) {
  const DiscreteSampler smp(off.pmf);
  const double scale = std::pow(off.m, -double(cfg.generations));
  std::vector<double> out(cfg.replicates);
  detail::for_each_replicate(cfg.replicates, threads, [&](std::uint64_t r) {
    Stream rng(cfg.master_seed, r);
    BitBuf bb;
    out[r] =
        double(detail::run_gw_final(1, cfg.generations, smp, rng, bb, cfg.population_cap)) *
        scale;
  });
  return out;
}

// `replicates` independent values of the immigration process normalized limit.
inline std::vector<double> sample_gwi_limits(const OffspringSpec& off,
                                             const ImmigrationSpec& imm, const SimConfig& cfg,
                                             StartMode mode, unsigned threads = 0) {
  const DiscreteSampler off_smp(off.pmf);
  const DiscreteSampler imm_smp(imm.pmf);
  const double scale = std::pow(off.m, -double(cfg.generations));
  std::vector<double> out(cfg.replicates);
  detail::for_each_replicate(cfg.replicates, threads, [&](std::uint64_t r) {
    Stream rng(cfg.master_seed, r);
    BitBuf bb;
    std::vector<std::uint64_t> counts;
    std::uint64_t z = mode == StartMode::immigrant_start ? imm_smp.draw(rng, bb) : 1;
    counts.push_back(z);
    for (std::uint32_t g = 0; g < cfg.generations; ++g) {
      std::uint64_t next =
          detail::next_generation(z, off_smp, rng, bb, cfg.population_cap, counts);
      next += imm_smp.draw(rng, bb);
      counts.push_back(next);
      z = next;
    }
    out[r] = double(z) * scale;
  });
  return out;
}

// Smallest L with m^-L * EY / (1 - 1/m) below tail_bound.
inline int default_decomposition_levels(const OffspringSpec& off, const ImmigrationSpec& imm,
                                        double tail_bound = 1e-4) {
  const double ey = std::max(imm.mean_y, 1e-12);
  int L = 0;
  double tail = ey / (1.0 - 1.0 / off.m);
  while (tail >= tail_bound && L < 4096) {
    tail /= off.m;
    ++L;
  }
  return L;
}

// Samples of sum_{l=0..L} m^-l sum_{j<=Y_l} W_l^j: an independent Y draw per
// level and an independent depth-n W approximant per immigrant, all from the
// replicate's own stream.
inline std::vector<double> sample_curlyW_decomposition(const OffspringSpec& off,
                                                       const ImmigrationSpec& imm,
                                                       const SimConfig& cfg, int levels,
                                                       unsigned threads = 0) {
  if (levels < 0) throw std::invalid_argument("sample_curlyW_decomposition: levels < 0");
  const DiscreteSampler off_smp(off.pmf);
  const DiscreteSampler imm_smp(imm.pmf);
  const double wscale = std::pow(off.m, -double(cfg.generations));
  std::vector<double> out(cfg.replicates);
  detail::for_each_replicate(cfg.replicates, threads, [&](std::uint64_t r) {
    Stream rng(cfg.master_seed, r);
    BitBuf bb;
    double acc = 0.0;
    double level_weight = 1.0;
    for (int l = 0; l <= levels; ++l) {
      const std::uint64_t y = imm_smp.draw(rng, bb);
      for (std::uint64_t j = 0; j < y; ++j) {
        const std::uint64_t zn =
            detail::run_gw_final(1, cfg.generations, off_smp, rng, bb, cfg.population_cap);
        acc += level_weight * double(zn) * wscale;
      }
      level_weight /= off.m;
    }
    out[r] = acc;
  });
  return out;
}

// Samples of W + curlyW/m: one ancestor line plus an immigration process one
// generation late, independent within each replicate.
inline std::vector<double> sample_tildeW(const OffspringSpec& off, const ImmigrationSpec& imm,
                                         const SimConfig& cfg, unsigned threads = 0) {
  const DiscreteSampler off_smp(off.pmf);
  const DiscreteSampler imm_smp(imm.pmf);
  const double wscale = std::pow(off.m, -double(cfg.generations));
  std::vector<double> out(cfg.replicates);
  detail::for_each_replicate(cfg.replicates, threads, [&](std::uint64_t r) {
    Stream rng(cfg.master_seed, r);
    BitBuf bb;
    const std::uint64_t w_final =
        detail::run_gw_final(1, cfg.generations, off_smp, rng, bb, cfg.population_cap);
    // independent immigration process, normalized at the same depth
    std::vector<std::uint64_t> counts;
    std::uint64_t z = imm_smp.draw(rng, bb);
    counts.push_back(z);
    for (std::uint32_t g = 0; g < cfg.generations; ++g) {
      std::uint64_t next =
          detail::next_generation(z, off_smp, rng, bb, cfg.population_cap, counts);
      next += imm_smp.draw(rng, bb);
      counts.push_back(next);
      z = next;
    }
    out[r] = double(w_final) * wscale + (double(z) * wscale) / off.m;
  });
  return out;
}

}  // namespace branchtail
