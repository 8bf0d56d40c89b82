#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "regen/config.hpp"
#include "regen/driver.hpp"
#include "regen/estimators.hpp"

namespace regen {

enum ExitCode : int {
  kExitOk = 0,
  kExitParse = 1,
  kExitDrift = 2,
  kExitSuite = 3,
  kExitRuntime = 4,
};

/// Runs fn(i) for i in [0, n) on `threads` workers. Results must be stored by
/// index; the first exception by index order is rethrown after all workers
/// finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Replicate index reserved for pilot cycle runs, disjoint from replicate
/// indices used for horizon runs.
inline constexpr std::uint64_t kPilotReplicate = std::uint64_t{1} << 62;
inline constexpr std::uint64_t kLongRunReplicate = (std::uint64_t{1} << 62) + 1;

struct KappaInfo {
  double kappa = 0.0;
  double rho = 0.0;
  /// "exact", "given" or "empirical".
  std::string source;
  std::optional<KappaFit> fit;
};

/// Exact kappa for the scalar backend; for the PDE backend either the
/// configured value or the empirical fit over jumps drawn from the eta law.
KappaInfo resolve_kappa(const Experiment& ex);

struct PilotResult {
  std::uint64_t master_seed = 0;
  WarmUp warm_up;
  std::vector<CycleRecord> cycles;  // kept only when requested
  /// One series per functional.
  std::vector<CycleSeries> series;
  std::vector<CycleStats> stats;
};

PilotResult run_pilot(const Experiment& ex, std::uint64_t master_seed, std::uint64_t n_cycles,
                      bool keep_records);

/// Outcome of one master seed of the CLT / Anscombe experiment.
struct CltSeedResult {
  std::uint64_t master_seed = 0;
  double nu_hat = 0.0;
  double se_nu = 0.0;
  double sigma2_hat = 0.0;
  double mean_tau = 0.0;
  std::size_t pilot_cycles = 0;
  std::vector<double> integral;    // per replicate
  std::vector<double> statistic;   // (I - t nu) / sqrt(t)
  std::vector<std::uint64_t> renewal_count;
  std::vector<RandomIndexSum> anscombe;
  double statistic_variance = 0.0;
  double variance_rel_error = 0.0;
  bool degenerate = false;
  std::optional<TestReport> ks;
  std::optional<TestReport> anscombe_ks;
  double theta = 0.0;
};

struct CltResult {
  std::size_t functional = 0;
  double t = 0.0;
  /// Shared pilot on the reserved stream of the configured master seed.
  CycleStats pilot;
  std::vector<CltSeedResult> seeds;
  double ks_pass_fraction = 0.0;
  double anscombe_pass_fraction = 0.0;
  bool variance_ok = false;
  bool degenerate = false;
  bool clt_pass = false;
  bool anscombe_pass = false;
};

/// The CLT experiment over all configured seeds. nu_hat and sigma2_hat come
/// from one pilot run shared by all seeds; replicates run on the worker pool
/// and are merged by replicate index.
CltResult run_clt_experiment(const Experiment& ex, unsigned threads);

struct CommandOptions {
  std::string config_path;
  std::string out_dir;
  unsigned threads = 1;
  bool force = false;
};

/// Entry point shared by the CLI and the tests; returns the exit code and
/// reports diagnostics on `log`.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& log);

}  // namespace regen
