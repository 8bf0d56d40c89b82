#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "regen/driver.hpp"
#include "regen/functionals.hpp"
#include "regen/semigroup.hpp"

namespace regen {

struct ExtinctionPolicy {
  /// Threshold on ||T(beta_m) X_{m-1}||_V below which the pre-jump state
  /// counts as extinct.
  double eps_ext = 1e-12;
  /// Maximum chain steps per cycle (and for the warm-up segment).
  std::uint64_t m_cap = 1000000;

  void validate() const;
};

struct StepResult {
  StateVector next;
  bool extinct = false;
};

/// next = T(beta) prev + eta. When the pre-jump state is extinct it is
/// replaced by exact zero, so next == eta bit for bit.
StepResult step_chain(const StateVector& prev, double beta, const StateVector& eta,
                      const Semigroup& sg, const ExtinctionPolicy& policy);

/// The jump chain X_m with jump times alpha_m (alpha_0 = 0).
struct Chain {
  std::vector<StateVector> states;
  std::vector<double> jump_times;
  std::vector<double> betas;
  std::vector<StateVector> etas;
  std::vector<bool> extinct;  // extinct[m] refers to step m (index 0 unused)
};

/// Builds the first `n_steps` steps of the chain from x0.
Chain build_chain(const StateVector& x0, const DriverConfig& driver, ReplicateRng& rng,
                  const Semigroup& sg, const ExtinctionPolicy& policy, std::size_t n_steps);

/// X(t) = T(t - alpha_m) X_m on [alpha_m, alpha_{m+1}). Throws OutOfHorizon
/// unless t < last jump time.
StateVector evaluate_path(const Chain& chain, const Semigroup& sg, double t);

/// Trajectory dump with columns m, alpha_m, norm_V1, norm_V2, extinct_flag.
void write_trajectory_csv(std::ostream& os, const Chain& chain, const Semigroup& sg);

struct CycleRecord {
  std::uint64_t n = 0;        // cycle index, starting at 1
  std::uint64_t m_start = 0;  // e_x(n)
  std::uint64_t m_end = 0;    // e_x(n+1)
  double t_start = 0.0;
  double t_end = 0.0;
  double tau = 0.0;
  /// One integral per functional, in the order they were supplied.
  std::vector<WValue> integrals;
};

/// Path segment before the first extinction time.
struct WarmUp {
  std::uint64_t m_end = 0;  // e_x(1)
  double t_end = 0.0;
  std::vector<WValue> integrals;
};

struct SimulationSetup {
  const Semigroup* sg = nullptr;
  const DriverConfig* driver = nullptr;
  ExtinctionPolicy policy;
  QuadConfig quad;
  std::span<const Functional> functionals;
};

using CycleSink = std::function<void(const CycleRecord&)>;

/// Runs the chain until `n_cycles` complete cycles have been emitted to
/// `sink`. Memory does not grow with the cycle count.
WarmUp simulate_cycles(const StateVector& x0, const SimulationSetup& setup, ReplicateRng& rng,
                       std::uint64_t n_cycles, const CycleSink& sink);

struct HorizonResult {
  std::vector<double> checkpoints;
  /// integrals[c][f]: int_0^{checkpoint c} Xi_f(X(tau)) dtau.
  std::vector<std::vector<WValue>> integrals;
  /// L(t) = max{k : alpha_{e_x(k)} <= t}, zero before the first extinction.
  std::vector<std::uint64_t> renewal_counts;
  std::vector<CycleRecord> cycles;
  WarmUp warm_up;
  std::uint64_t chain_steps = 0;
};

struct HorizonOptions {
  /// Extinction events to wait for after the horizon so that cycles
  /// 1..L(t)+1 are complete (2 covers the random-index sums).
  int extinctions_after_horizon = 0;
  bool keep_cycles = true;
};

/// One pass producing path integrals at increasing checkpoints (the last
/// one is the horizon), renewal counts, and the completed cycles.
HorizonResult simulate_until_time(const StateVector& x0, const SimulationSetup& setup,
                                  ReplicateRng& rng, std::span<const double> checkpoints,
                                  const HorizonOptions& options = {});

}  // namespace regen
