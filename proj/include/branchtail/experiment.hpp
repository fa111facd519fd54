#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "branchtail/asymptotics.hpp"
#include "branchtail/distributions.hpp"
#include "branchtail/estimate.hpp"
#include "branchtail/io.hpp"
#include "branchtail/laplace.hpp"
#include "branchtail/simulate.hpp"

namespace branchtail {

enum class Pipeline { classify, tail, laplace, verify };

inline const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::classify: return "classify";
    case Pipeline::tail: return "tail";
    case Pipeline::laplace: return "laplace";
    case Pipeline::verify: return "verify";
  }
  return "?";
}

// exit-code contract: modeling vs numerical failures are distinguishable in CI
inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitNumerical = 4;

class SpecParseError : public std::runtime_error {
 public:
  SpecParseError(int line, int col, const std::string& what)
      : std::runtime_error(what), line_(line), col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_, col_;
};

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int points = 0;
};

// One experiment: model, limit variant, pipeline and its numeric knobs.
// File format is line-based `key = value` with `#` comments.
struct ExperimentSpec {
  Pmf offspring = Pmf::fractional_linear(2.0);
  std::optional<Pmf> immigration;
  Variant variant = Variant::W_only;
  Pipeline pipeline = Pipeline::classify;
  std::optional<GridSpec> epsilons;
  std::optional<GridSpec> lambdas;
  std::uint64_t replicates = 100000;
  std::uint32_t generations = 20;
  std::uint64_t seed = 20260808;
  double rate_tolerance = 0.2;
  double atom_tolerance = 0.01;
  std::string dump_samples;            // optional sample dump path (relative to out dir)
  std::vector<std::string> raw_lines;  // verbatim file content for artifact echo
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline GridSpec parse_grid(const std::string& value, int line, int col) {
  std::istringstream in(value);
  GridSpec g;
  if (!(in >> g.min >> g.max >> g.points))
    throw SpecParseError(line, col, "grid needs three values: min max points");
  std::string rest;
  if (in >> rest) throw SpecParseError(line, col, "grid has trailing token '" + rest + "'");
  if (!(g.min > 0.0) || !(g.max > g.min) || g.points < 2)
    throw SpecParseError(line, col, "grid needs 0 < min < max and points >= 2");
  return g;
}

inline std::uint64_t parse_u64(const std::string& value, int line, int col) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);  // accept 1e7 style counts
    if (used != value.size() || d < 0.0 || d > 1.8e19 || d != std::floor(d))
      throw std::invalid_argument("");
    return std::uint64_t(d);
  } catch (...) {
    throw SpecParseError(line, col, "expected a nonnegative integer, got '" + value + "'");
  }
}

inline double parse_double(const std::string& value, int line, int col) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw SpecParseError(line, col, "expected a number, got '" + value + "'");
  }
}

}  // namespace detail

inline ExperimentSpec parse_experiment(const std::string& text) {
  ExperimentSpec spec;
  bool have_offspring = false, have_variant = false, immigration_none = false;
  std::vector<std::string> seen;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    spec.raw_lines.push_back(raw);
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;

    const std::size_t eq = line.find('=');
    const int key_col = int(line.find_first_not_of(" \t")) + 1;
    if (eq == std::string::npos)
      throw SpecParseError(line_no, key_col, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const int value_col = int(line.find_first_not_of(" \t", eq + 1)) + 1;
    if (key.empty()) throw SpecParseError(line_no, key_col, "missing key before '='");
    if (value.empty()) throw SpecParseError(line_no, int(eq) + 2, "missing value for '" + key + "'");
    for (const std::string& s : seen)
      if (s == key) throw SpecParseError(line_no, key_col, "duplicate key '" + key + "'");
    seen.push_back(key);

    auto parse_pmf_value = [&]() {
      try {
        return Pmf::parse(value);
      } catch (const PmfParseError& e) {
        throw SpecParseError(line_no, value_col + int(e.offset()), e.what());
      }
    };

    if (key == "offspring") {
      spec.offspring = parse_pmf_value();
      have_offspring = true;
    } else if (key == "immigration") {
      if (value == "none")
        immigration_none = true;
      else
        spec.immigration = parse_pmf_value();
    } else if (key == "variant") {
      if (value == "curlyW") spec.variant = Variant::curlyW;
      else if (value == "tildeW") spec.variant = Variant::tildeW;
      else if (value == "W_only") spec.variant = Variant::W_only;
      else throw SpecParseError(line_no, value_col, "variant must be curlyW|tildeW|W_only");
      have_variant = true;
    } else if (key == "pipeline") {
      if (value == "classify") spec.pipeline = Pipeline::classify;
      else if (value == "tail") spec.pipeline = Pipeline::tail;
      else if (value == "laplace") spec.pipeline = Pipeline::laplace;
      else if (value == "verify") spec.pipeline = Pipeline::verify;
      else throw SpecParseError(line_no, value_col, "pipeline must be classify|tail|laplace|verify");
    } else if (key == "epsilons") {
      spec.epsilons = detail::parse_grid(value, line_no, value_col);
    } else if (key == "lambdas") {
      spec.lambdas = detail::parse_grid(value, line_no, value_col);
    } else if (key == "replicates") {
      spec.replicates = detail::parse_u64(value, line_no, value_col);
      if (spec.replicates < 1) throw SpecParseError(line_no, value_col, "replicates must be >= 1");
    } else if (key == "generations") {
      const std::uint64_t g = detail::parse_u64(value, line_no, value_col);
      if (g < 1 || g > 1000000) throw SpecParseError(line_no, value_col, "generations out of range");
      spec.generations = std::uint32_t(g);
    } else if (key == "seed") {
      spec.seed = detail::parse_u64(value, line_no, value_col);
    } else if (key == "rate_tolerance") {
      spec.rate_tolerance = detail::parse_double(value, line_no, value_col);
      if (!(spec.rate_tolerance > 0.0))
        throw SpecParseError(line_no, value_col, "rate_tolerance must be positive");
    } else if (key == "atom_tolerance") {
      spec.atom_tolerance = detail::parse_double(value, line_no, value_col);
      if (!(spec.atom_tolerance > 0.0))
        throw SpecParseError(line_no, value_col, "atom_tolerance must be positive");
    } else if (key == "dump_samples") {
      spec.dump_samples = value;
    } else {
      throw SpecParseError(line_no, key_col, "unknown key '" + key + "'");
    }
  }

  if (!have_offspring) throw SpecParseError(line_no, 1, "missing required key 'offspring'");
  if (!have_variant) spec.variant = spec.immigration ? Variant::curlyW : Variant::W_only;
  if (spec.variant != Variant::W_only && !spec.immigration && !immigration_none)
    throw SpecParseError(line_no, 1, "variant needs an immigration law but none was given");
  if (spec.variant != Variant::W_only && !spec.immigration)
    throw SpecParseError(line_no, 1,
                         "variant " + std::string(variant_name(spec.variant)) +
                             " requires immigration != none");
  return spec;
}

inline ExperimentSpec parse_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecParseError(0, 0, "cannot open spec file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str());
}

struct RunOptions {
  std::string out_dir = ".";
  unsigned threads = 0;  // 0 = hardware; must not change any output value
  std::optional<std::uint64_t> seed_override;
  std::optional<std::uint64_t> replicates_override;
  std::optional<Pipeline> pipeline_override;
  bool quiet = false;
};

// one summary row, also used by verify_all tables
struct RunRow {
  std::string name;
  std::string case_name = "-";
  std::string predicted = "-";
  std::string fitted = "-";
  std::string tolerance = "-";
  std::string result = "-";
  int exit_code = kExitPass;
  double wall_seconds = 0.0;
};

namespace detail {

struct CheckOutcome {
  std::string model = "-";
  double predicted = 0.0;
  double fitted = 0.0;
  double tolerance = 0.0;
  bool absolute = false;  // atom checks use absolute tolerance
  bool skipped = false;
  std::string skip_reason;
  bool passed = false;
};

inline std::vector<std::string> spec_echo(const ExperimentSpec& spec) {
  std::vector<std::string> lines;
  lines.push_back("spec:");
  for (const std::string& l : spec.raw_lines) lines.push_back("  " + l);
  return lines;
}

inline std::vector<std::string> spec_echo_with_regime(const ExperimentSpec& spec,
                                                      const RegimeReport& report) {
  std::vector<std::string> lines = spec_echo(spec);
  lines.push_back("regime:");
  std::istringstream in(report.to_text());
  std::string l;
  while (std::getline(in, l)) lines.push_back("  " + l);
  return lines;
}

inline void write_regime_txt(const std::string& path, const ExperimentSpec& spec,
                             const RegimeReport& report) {
  std::ofstream out = open_for_write(path);
  out << "# branchtail " << kToolVersion << "\n";
  out << "offspring = " << spec.offspring.to_string() << "\n";
  out << "immigration = " << (spec.immigration ? spec.immigration->to_string() : "none")
      << "\n";
  out << report.to_text();
}

inline void write_report_txt(const std::string& path, const ExperimentSpec& spec,
                             const RegimeReport& report, const CheckOutcome& chk) {
  std::ofstream out = open_for_write(path);
  out << "# branchtail " << kToolVersion << "\n";
  out << "pipeline = " << pipeline_name(spec.pipeline) << "\n";
  out << "offspring = " << spec.offspring.to_string() << "\n";
  out << "immigration = " << (spec.immigration ? spec.immigration->to_string() : "none")
      << "\n";
  out << "variant = " << variant_name(spec.variant) << "\n";
  out << "case = " << regime_name(report.regime) << "\n";
  out << "model = " << chk.model << "\n";
  if (chk.skipped) {
    out << "check = skipped\n";
    out << "reason = " << chk.skip_reason << "\n";
    out << "result = SKIPPED\n";
    return;
  }
  out << "predicted = " << fmt17(chk.predicted) << "\n";
  out << "fitted = " << fmt17(chk.fitted) << "\n";
  out << "tolerance = " << fmt17(chk.tolerance)
      << (chk.absolute ? " (absolute)\n" : " (relative)\n");
  const double err = chk.absolute
                         ? std::fabs(chk.fitted - chk.predicted)
                         : std::fabs(chk.fitted - chk.predicted) / std::fabs(chk.predicted);
  out << (chk.absolute ? "absolute_error = " : "relative_error = ") << fmt17(err) << "\n";
  out << "result = " << (chk.passed ? "PASS" : "FAIL") << "\n";
}

inline std::vector<double> draw_variant_samples(const ExperimentSpec& spec,
                                                const OffspringSpec& off,
                                                const ImmigrationSpec* imm,
                                                const RunOptions& opts) {
  SimConfig cfg;
  cfg.generations = spec.generations;
  cfg.replicates = opts.replicates_override.value_or(spec.replicates);
  cfg.master_seed = opts.seed_override.value_or(spec.seed);
  switch (spec.variant) {
    case Variant::W_only:
      return sample_W(off, cfg, opts.threads);
    case Variant::curlyW:
      return sample_gwi_limits(off, *imm, cfg, StartMode::immigrant_start, opts.threads);
    case Variant::tildeW:
      return sample_tildeW(off, *imm, cfg, opts.threads);
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

// Execute one spec file. Writes artifacts under opts.out_dir and fills a
// summary row; returns the process exit code.
inline int run_spec(const ExperimentSpec& parsed, const RunOptions& opts, RunRow& row) {
  namespace fs = std::filesystem;
  ExperimentSpec spec = parsed;
  if (opts.pipeline_override) spec.pipeline = *opts.pipeline_override;
  if (opts.seed_override) spec.seed = *opts.seed_override;
  if (opts.replicates_override) spec.replicates = *opts.replicates_override;
  fs::create_directories(opts.out_dir);
  const std::string dir = opts.out_dir + "/";
  const std::vector<std::string> echo = detail::spec_echo(spec);

  const OffspringSpec off = OffspringSpec::from_pmf(spec.offspring);
  std::optional<ImmigrationSpec> imm;
  if (spec.immigration) imm = ImmigrationSpec::from_pmf(*spec.immigration);

  const LogMomentReport moments_ok =
      spec.immigration ? validate_log_moments(spec.offspring, *spec.immigration)
                       : validate_log_moments(spec.offspring, Pmf::finite({{0, 1.0}}));
  if (!moments_ok.ok) throw NotSupercriticalError(moments_ok.message);

  const RegimeReport report = classify(off, imm ? &*imm : nullptr, spec.variant);
  detail::write_regime_txt(dir + "regime.txt", spec, report);
  row.case_name = regime_name(report.regime);
  if (!opts.quiet) std::printf("%s", report.to_text().c_str());

  if (report.regime == Regime::Degenerate) {
    row.result = "DEGENERATE";
    row.exit_code = kExitDegenerate;
    return kExitDegenerate;
  }
  if (spec.pipeline == Pipeline::classify) {
    row.result = "OK";
    if (report.power_exponent) row.predicted = fmt17(report.power_exponent->value());
    else if (report.logsq_coefficient) row.predicted = fmt17(*report.logsq_coefficient);
    else if (report.stretched_exponent) row.predicted = fmt17(*report.stretched_exponent);
    return kExitPass;
  }

  // route: power-law regimes (and atom checks) verify by Monte Carlo when an
  // epsilon grid is given, by the transform otherwise; the log^2 and
  // stretched regimes are only reachable through the transform
  Pipeline route = spec.pipeline;
  if (route == Pipeline::verify) {
    if (report.is_power())
      route = !spec.epsilons && spec.lambdas ? Pipeline::laplace : Pipeline::tail;
    else
      route = Pipeline::laplace;
  }

  detail::CheckOutcome chk;
  if (route == Pipeline::tail) {
    if (!spec.epsilons)
      throw SpecParseError(0, 0, "tail pipeline requires an 'epsilons' grid");
    const std::vector<double> samples =
        detail::draw_variant_samples(spec, off, imm ? &*imm : nullptr, opts);
    if (!spec.dump_samples.empty()) {
      std::vector<std::string> dump_echo = echo;
      dump_echo.push_back("effective seed = " + std::to_string(spec.seed));
      dump_echo.push_back("effective generations = " + std::to_string(spec.generations));
      dump_echo.push_back("effective replicates = " + std::to_string(spec.replicates));
      write_sample_dump(dir + spec.dump_samples, samples, dump_echo);
    }
    const TailCurve curve =
        mc_tail(samples, log_spaced_grid(spec.epsilons->min, spec.epsilons->max,
                                         spec.epsilons->points),
                opts.seed_override.value_or(spec.seed));
    write_tail_csv(dir + "tail.csv", curve, detail::spec_echo_with_regime(spec, report));

    if (spec.variant == Variant::W_only && report.rho > 0.0) {
      chk.model = "atom";
      chk.predicted = report.rho;
      chk.fitted = zero_fraction(samples);
      chk.tolerance = spec.atom_tolerance;
      chk.absolute = true;
      chk.passed = std::fabs(chk.fitted - chk.predicted) <= chk.tolerance;
    } else if (report.is_power()) {
      const TailFit fit = fit_tail(curve, report);
      chk.model = "power";
      chk.predicted = report.power_exponent->value();
      chk.fitted = fit.fitted_rate;
      chk.tolerance = spec.rate_tolerance;
      chk.passed = std::fabs(chk.fitted - chk.predicted) <= chk.tolerance * chk.predicted;
    } else {
      chk.skipped = true;
      chk.model = report.is_logsq() ? "logsq" : "stretched";
      chk.skip_reason = "Monte Carlo cannot reach this regime's tail; use the laplace pipeline";
    }
  } else {  // laplace route
    if (!spec.lambdas)
      throw SpecParseError(0, 0, "laplace pipeline requires a 'lambdas' grid");
    if (spec.variant == Variant::W_only && report.rho > 0.0)
      throw NumericalError(
          "laplace fit is not applicable to W with an extinction atom; use the tail pipeline");
    const std::vector<double> grid =
        log_spaced_grid(spec.lambdas->min, spec.lambdas->max, spec.lambdas->points);
    LaplaceCurve curve;
    switch (spec.variant) {
      case Variant::W_only: curve = phi_W_curve(off, grid); break;
      case Variant::curlyW: curve = phi_curlyW_curve(off, *imm, grid); break;
      case Variant::tildeW: curve = phi_tildeW_curve(off, *imm, grid); break;
    }
    write_laplace_csv(dir + "laplace.csv", curve, detail::spec_echo_with_regime(spec, report));

    if (report.is_power()) {
      const LtFit fit = fit_lt_rate(curve, LtModel::power);
      chk.model = "power";
      chk.predicted = report.power_exponent->value();
      chk.fitted = -fit.exponent;  // transform decays like lambda^-exponent
      chk.tolerance = spec.rate_tolerance;
      chk.passed = std::fabs(chk.fitted - chk.predicted) <= chk.tolerance * chk.predicted;
    } else if (report.is_logsq()) {
      const LtFit fit = fit_lt_rate(curve, LtModel::logsq);
      chk.model = "logsq";
      chk.predicted = *report.logsq_coefficient;
      chk.fitted = fit.coefficient;
      chk.tolerance = spec.rate_tolerance;
      chk.passed = std::fabs(chk.fitted - chk.predicted) <= chk.tolerance * chk.predicted;
    } else {
      const LtFit fit = fit_lt_rate(curve, LtModel::stretched);
      chk.model = "stretched";
      chk.predicted = *report.beta;  // transform-side exponent is beta itself
      chk.fitted = fit.exponent;
      chk.tolerance = spec.rate_tolerance;
      chk.passed = std::fabs(chk.fitted - chk.predicted) <= chk.tolerance * chk.predicted;
    }
  }

  detail::write_report_txt(dir + "report.txt", spec, report, chk);
  if (chk.skipped) {
    row.result = "SKIPPED";
    if (!opts.quiet) std::printf("check skipped: %s\n", chk.skip_reason.c_str());
    return kExitPass;
  }
  row.predicted = fmt17(chk.predicted);
  row.fitted = fmt17(chk.fitted);
  row.tolerance = fmt17(chk.tolerance);
  row.result = chk.passed ? "PASS" : "FAIL";
  if (!opts.quiet)
    std::printf("%s: predicted %s fitted %s tolerance %s -> %s\n", chk.model.c_str(),
                row.predicted.c_str(), row.fitted.c_str(), row.tolerance.c_str(),
                row.result.c_str());
  if (!chk.passed) {
    row.exit_code = kExitCheckFailed;
    return kExitCheckFailed;
  }
  return kExitPass;
}

// Exception-mapping front door used by the CLI: 2 parse, 3 degenerate,
// 4 numerical.
inline int run(const std::string& spec_path, const RunOptions& opts, RunRow* row_out = nullptr) {
  RunRow row;
  row.name = std::filesystem::path(spec_path).stem().string();
  int code = kExitPass;
  try {
    const ExperimentSpec spec = parse_experiment_file(spec_path);
    code = run_spec(spec, opts, row);
  } catch (const SpecParseError& e) {
    std::fprintf(stderr, "%s: parse error at line %d, col %d: %s\n", spec_path.c_str(),
                 e.line(), e.col(), e.what());
    row.result = "PARSE_ERROR";
    code = kExitParse;
  } catch (const PmfParseError& e) {
    std::fprintf(stderr, "%s: distribution literal error at offset %zu: %s\n",
                 spec_path.c_str(), e.offset(), e.what());
    row.result = "PARSE_ERROR";
    code = kExitParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", spec_path.c_str(), e.what());
    row.result = "ERROR";
    code = kExitNumerical;
  }
  row.exit_code = code;
  if (row_out) *row_out = row;
  return code;
}

// Run every *.spec in a directory (sorted), one summary row per spec.
// Partial table is still written when rows fail; empty suite is exit 2.
inline int verify_all(const std::string& suite_dir, const RunOptions& opts) {
  namespace fs = std::filesystem;
  std::vector<std::string> specs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(suite_dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".spec")
      specs.push_back(entry.path().string());
  if (ec) {
    std::fprintf(stderr, "cannot read suite directory %s: %s\n", suite_dir.c_str(),
                 ec.message().c_str());
    return kExitParse;
  }
  std::sort(specs.begin(), specs.end());
  if (specs.empty()) {
    std::fprintf(stderr, "no .spec files in %s\n", suite_dir.c_str());
    return kExitParse;
  }

  std::vector<RunRow> rows;
  for (const std::string& path : specs) {
    RunOptions sub = opts;
    sub.quiet = true;
    sub.out_dir = opts.out_dir + "/" + fs::path(path).stem().string();
    RunRow row;
    const auto t0 = std::chrono::steady_clock::now();
    run(path, sub, &row);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
    std::printf("%-28s %-10s %-22s %-22s %-10s %-12s %.2fs\n", row.name.c_str(),
                row.case_name.c_str(), row.predicted.c_str(), row.fitted.c_str(),
                row.tolerance.c_str(), row.result.c_str(), row.wall_seconds);
  }

  fs::create_directories(opts.out_dir);
  std::ofstream table(opts.out_dir + "/verify_summary.txt");
  table << "# branchtail " << kToolVersion << "\n";
  table << "spec,case,predicted,fitted,tolerance,result,wall_seconds\n";
  bool all_ok = true;
  for (const RunRow& r : rows) {
    table << r.name << ',' << r.case_name << ',' << r.predicted << ',' << r.fitted << ','
          << r.tolerance << ',' << r.result << ',' << fmt17(r.wall_seconds) << "\n";
    if (r.exit_code != kExitPass) all_ok = false;
  }
  return all_ok ? kExitPass : kExitCheckFailed;
}

}  // namespace branchtail
