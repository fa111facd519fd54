#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchtail/estimate.hpp"
#include "branchtail/laplace.hpp"

namespace branchtail {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

inline void write_comment_block(std::ofstream& out, std::span<const std::string> comments) {
  out << "# branchtail " << kToolVersion << "\n";
  for (const std::string& line : comments) out << "# " << line << "\n";
}

}  // namespace detail

inline void write_tail_csv(const std::string& path, const TailCurve& c,
                           std::span<const std::string> comments = {}) {
  std::ofstream out = detail::open_for_write(path);
  detail::write_comment_block(out, comments);
  out << "epsilon,prob,ci_low,ci_high,replicates,seed\n";
  for (std::size_t i = 0; i < c.epsilons.size(); ++i)
    out << fmt17(c.epsilons[i]) << ',' << fmt17(c.probs[i]) << ',' << fmt17(c.ci_low[i]) << ','
        << fmt17(c.ci_high[i]) << ',' << c.replicates << ',' << c.seed << "\n";
}

inline void write_laplace_csv(const std::string& path, const LaplaceCurve& c,
                              std::span<const std::string> comments = {}) {
  std::ofstream out = detail::open_for_write(path);
  detail::write_comment_block(out, comments);
  out << "lambda,log_value,depth,terms\n";
  for (std::size_t i = 0; i < c.lambdas.size(); ++i)
    out << fmt17(c.lambdas[i]) << ',' << fmt17(c.log_values[i]) << ',' << c.depths[i] << ','
        << c.terms[i] << "\n";
}

// One value per line, decimal text; header comments record the provenance.
inline void write_sample_dump(const std::string& path, std::span<const double> samples,
                              std::span<const std::string> comments = {}) {
  std::ofstream out = detail::open_for_write(path);
  detail::write_comment_block(out, comments);
  for (double v : samples) out << fmt17(v) << "\n";
}

}  // namespace branchtail
