#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regen/driver.hpp"
#include "regen/errors.hpp"
#include "regen/functionals.hpp"
#include "regen/jump_process.hpp"
#include "regen/plaplace.hpp"
#include "regen/semigroup.hpp"

namespace regen {

/// Malformed configuration text, with a 1-based source position.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& source, int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Sectioned key = value text. Lines starting with '#' or ';' are comments.
class IniDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
    int column = 0;  // column of the value
    int key_column = 0;
    mutable bool used = false;
  };

  static IniDocument parse(const std::string& text, const std::string& source = "<config>");
  static IniDocument load(const std::string& path);

  const std::string& source() const { return source_; }
  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
  const Entry* find(const std::string& section, const std::string& key) const;

  /// Typed accessors; a missing key returns the fallback, a malformed value
  /// throws ParseError pointing at the value.
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;

  [[noreturn]] void fail(const Entry& e, const std::string& what) const;

  /// Throws ParseError at the first section or key never read.
  void reject_unused() const;

  /// Sections and keys in sorted order with trimmed values; independent of
  /// the order in the file.
  std::string canonical() const;

 private:
  struct Section {
    int line = 0;
    std::map<std::string, Entry> entries;
    mutable bool used = false;
  };
  std::string source_;
  std::map<std::string, Section> sections_;
};

/// SHA-256 of the canonical form, hex encoded.
std::string config_hash(const IniDocument& doc);

enum class Backend { Scalar, PLaplace };

struct InitialSpec {
  enum class Kind { Zero, Profile, Random } kind = Kind::Zero;
  std::vector<double> profile;
  double amp = 0.5;
};

struct RunPlan {
  std::uint64_t n_cycles = 100000;
  std::uint64_t pilot_cycles = 20000000;
  double t_end = 10000.0;
  std::vector<double> checkpoints;  // empty: decades up to t_end
  std::uint64_t n_replicates = 2000;
  double clt_t = 1000.0;
  std::uint64_t n_seeds = 1;
  double alpha = 0.01;
  double pass_fraction = 0.95;
  double var_tolerance = 0.15;
  std::uint64_t drift_mc = 100000;
  std::uint64_t moment_draws = 100000;
  std::uint64_t axiom_samples = 200;
  std::uint64_t kappa_corpus = 20;
  double kappa_time_cap = 100.0;
  bool write_cycles = true;
};

struct ExperimentConfig {
  Backend backend = Backend::Scalar;
  ExtinctionParams scalar;
  Grid1D grid;
  PLaplaceConfig pde;
  double gamma_min = 1.0;
  double gamma_max = 1.0;
  std::uint64_t gamma_seed = 0;
  /// Given kappa for the PDE backend; empty selects the empirical fit.
  std::optional<double> pde_kappa;
  double q_v2 = 2.0;
  DriverConfig driver{BetaLaw(beta_law::Exponential{1.0}), EtaLaw(eta_law::ScalarUniform{1.0}), 0};
  InitialSpec initial;
  std::vector<std::string> functional_specs{"norm_v2"};
  RunPlan run;
  ExtinctionPolicy policy;
  QuadConfig quad;
  std::string hash;
};

ExperimentConfig parse_experiment(const IniDocument& doc);
ExperimentConfig load_experiment(const std::string& path);

/// Objects built from a validated configuration.
struct Experiment {
  ExperimentConfig cfg;
  std::shared_ptr<PLaplaceProblem> problem;
  std::shared_ptr<Semigroup> sg;
  StateVector shape;
  std::vector<Functional> functionals;
  std::vector<std::string> functional_names;
};

Experiment build_experiment(const ExperimentConfig& cfg);

/// Parses one functional spec: identity | norm_v2 | mass | constant:w |
/// shift:base:w (base norm_v2 or mass) | linear:a;b;c.
Functional parse_functional(const std::string& spec, const StateVector& shape);

StateVector initial_state(const Experiment& ex, std::uint64_t master_seed, std::uint64_t replicate);

}  // namespace regen
