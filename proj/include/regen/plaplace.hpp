#pragma once

// Weighted p-Laplacian evolution with homogeneous Neumann boundary on a 1-D
// cell grid, 1 < p < 2. Time stepping is implicit Euler; each step minimizes
// the strictly convex energy
//
//   E(w) = 1/2 sum_i (w_i - u_i)^2 h + dt/p sum_e gamma_e (|D_e w|^2 + eps^2)^(p/2) h
//
// with D_e w = (w_{i+1} - w_i) / h, by damped Newton with backtracking.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "regen/state.hpp"

namespace regen {

struct Grid1D {
  int n_cells = 64;
  double length = 1.0;

  double h() const { return length / n_cells; }
  void validate() const;
};

/// Per-edge weights gamma_e, one per interior edge (n_cells - 1 values).
struct WeightField {
  std::vector<double> gamma;

  static WeightField constant(const Grid1D& grid, double value);
  double min() const;
  double max() const;
  void validate(const Grid1D& grid) const;
};

struct PLaplaceConfig {
  double p = 1.5;
  double dt = 1e-2;
  double eps_reg = 1e-8;
  double newton_tol = 1e-10;
  int newton_max_iter = 200;
  /// Extinction threshold on the discrete L2 norm. Non-positive selects the
  /// default 1e-12 * sqrt(L).
  double eps_ext = 0.0;

  void validate() const;
};

/// Everything needed to evolve a grid state; validated on construction.
class PLaplaceProblem {
 public:
  PLaplaceProblem(Grid1D grid, WeightField weights, PLaplaceConfig cfg);

  const Grid1D& grid() const { return grid_; }
  const WeightField& weights() const { return weights_; }
  const PLaplaceConfig& config() const { return cfg_; }
  double eps_ext() const { return eps_ext_; }

  /// Throws ConfigError unless `u` is a grid state on this grid.
  void check_state(const StateVector& u) const;

 private:
  Grid1D grid_;
  WeightField weights_;
  PLaplaceConfig cfg_;
  double eps_ext_;
};

/// (A_h u)_i = -(F_{i+1/2} - F_{i-1/2}) / h with zero boundary fluxes.
StateVector apply_discrete_operator(const StateVector& u, const Grid1D& grid,
                                    const WeightField& weights, double p, double eps_reg);

/// Per-step energy E(w; u, dt) as written above.
double step_energy(const StateVector& w, const StateVector& u, const PLaplaceProblem& problem,
                   double dt);

struct StepStats {
  int iterations = 0;
  double residual = 0.0;
  int gradient_fallbacks = 0;
};

/// One implicit Euler step of size `dt`: solves w + dt A_h w = u.
/// Throws NonConvergence when the iteration cap is reached.
StateVector implicit_euler_step(const StateVector& u, const PLaplaceProblem& problem, double dt,
                                StepStats* stats = nullptr);

/// Same as above with dt taken from the configuration.
StateVector implicit_euler_step(const StateVector& u, const PLaplaceProblem& problem,
                                StepStats* stats = nullptr);

struct TimeSplit {
  std::size_t full_steps = 0;
  double remainder = 0.0;
};

/// Decomposes t into whole steps plus a partial step. Times within 1e-9
/// relative of a multiple of dt are treated as exact multiples, and
/// remainders below 1e-14 are dropped.
TimeSplit split_time(double t, double dt);

/// T_h(t)u: whole steps followed by one partial step; states whose L2 norm
/// falls below eps_ext are replaced by exact zero.
StateVector evolve_plaplace(const StateVector& u, double t, const PLaplaceProblem& problem);

StateVector project_zero_mean(const StateVector& u);

/// Lazily cached grid states T_h(k dt)u used for repeated evaluation along
/// one inter-jump segment. Evaluation agrees bit for bit with
/// evolve_plaplace.
class PLaplaceTrajectory {
 public:
  PLaplaceTrajectory(const PLaplaceProblem& problem, StateVector u0);

  const StateVector& grid_state(std::size_t k);
  StateVector at_offset(std::size_t k, double r);
  StateVector at(double t);

  /// First grid index whose state is exactly zero, once it has been reached.
  std::optional<std::size_t> extinct_index() const { return extinct_index_; }

 private:
  const PLaplaceProblem* problem_;
  std::vector<StateVector> states_;
  std::optional<std::size_t> extinct_index_;
};

/// Decay record of one sample: times t_k and ||u(t_k)||_2^rho.
struct DecayCurve {
  std::vector<double> times;
  std::vector<double> norm_rho;
};

struct KappaFit {
  double kappa_emp = 0.0;
  double rho_used = 0.0;
  /// Largest positive excess of ||u(t)||^rho over (||u0||^rho - kappa t)_+.
  double fit_residual = 0.0;
  std::size_t samples_used = 0;
  std::vector<DecayCurve> curves;
};

/// Largest kappa with norm_rho(t) <= (norm_rho(0) - kappa t)_+ on every curve.
/// Curves starting at zero are skipped.
KappaFit fit_extinction_rate(std::span<const DecayCurve> curves, double rho);

/// Evolves each zero-mean sample to extinction (below eps_ext) and fits
/// kappa with rho = 2 - p. Throws NoExtinction past `time_cap`.
KappaFit estimate_kappa(std::span<const StateVector> samples, const PLaplaceProblem& problem,
                        double time_cap);

}  // namespace regen
