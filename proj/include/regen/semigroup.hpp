#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "regen/plaplace.hpp"
#include "regen/state.hpp"

namespace regen {

/// Decay constants of the bound ||T(t)v||^rho <= (||v||^rho - kappa t)_+.
struct ExtinctionParams {
  double kappa = 1.0;
  double rho = 0.5;

  void validate() const;
};

/// |v|^rho / kappa for a scalar state.
double scalar_extinction_time(const ExtinctionParams& params, const StateVector& v);

/// Closed-form scalar flow sign(v) ((|v|^rho - kappa t)_+)^(1/rho).
double scalar_power_law(const ExtinctionParams& params, double v, double t);

/// Evaluates T(tau) applied to one fixed state for tau >= 0. Grid flows
/// cache the whole-step states so that repeated evaluation along one segment
/// costs one partial step each.
class Flow {
 public:
  Flow(ExtinctionParams params, StateVector v);
  Flow(const PLaplaceProblem& problem, StateVector v);

  StateVector at(double tau);
  const StateVector& initial() const { return initial_; }

  /// Known extinction time, if the flow has one in closed form.
  std::optional<double> extinction_time() const;

  /// Grid flows only: the whole-step structure used to place quadrature
  /// breakpoints.
  PLaplaceTrajectory* trajectory() { return trajectory_ ? &*trajectory_ : nullptr; }

 private:
  StateVector initial_;
  std::optional<ExtinctionParams> scalar_;
  std::optional<PLaplaceTrajectory> trajectory_;
};

/// Handle to one of the built-in semigroups together with its norm
/// assignment. Cheap to copy; the p-Laplacian problem is shared.
class Semigroup {
 public:
  static Semigroup scalar_power_law(ExtinctionParams params);
  static Semigroup plaplace(std::shared_ptr<const PLaplaceProblem> problem, double q_v2 = 2.0);

  bool is_scalar() const { return std::holds_alternative<ExtinctionParams>(kind_); }
  const ExtinctionParams& scalar_params() const { return std::get<ExtinctionParams>(kind_); }
  const PLaplaceProblem& plaplace_problem() const {
    return *std::get<std::shared_ptr<const PLaplaceProblem>>(kind_);
  }

  const NormAssignment& norms() const { return norms_; }
  double norm_v(const StateVector& v) const { return norms_.v(v); }
  double norm_v1(const StateVector& v) const { return norms_.v1(v); }
  double norm_v2(const StateVector& v) const { return norms_.v2(v); }

  /// Throws ConfigError on a state of the wrong shape.
  void check_state(const StateVector& v) const;

  /// A zero state of the right shape.
  StateVector zero_state() const;

  StateVector evolve(const StateVector& v, double t) const;
  Flow flow(StateVector v) const;

 private:
  using Kind = std::variant<ExtinctionParams, std::shared_ptr<const PLaplaceProblem>>;
  Semigroup(Kind kind, NormAssignment norms) : kind_(std::move(kind)), norms_(norms) {}

  Kind kind_;
  NormAssignment norms_;
};

StateVector evolve(const Semigroup& sg, const StateVector& v, double t);

struct AxiomSample {
  StateVector v;
  /// Second state for the two-point contraction residual; defaults to zero.
  std::optional<StateVector> u;
  double t = 0.0;
  double s = 0.0;
};

struct AxiomResidual {
  double semigroup = 0.0;    // ||T(t+s)v - T(t)T(s)v||_V
  double contraction = 0.0;  // ||T(t)u - T(t)v||_V - ||u - v||_V
  double identity = 0.0;     // ||T(0)v - v||_V
};

struct AxiomReport {
  std::vector<AxiomResidual> residuals;
  double max_semigroup = 0.0;
  double max_contraction = 0.0;
  double max_identity = 0.0;
};

AxiomReport check_semigroup_axioms(const Semigroup& sg, std::span<const AxiomSample> samples);

}  // namespace regen
