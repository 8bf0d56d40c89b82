#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "regen/semigroup.hpp"
#include "regen/state.hpp"

namespace regen {

/// A value in W. Scalar-valued functionals use a length-one vector; the
/// identity functional uses one component per grid cell.
using WValue = std::vector<double>;

/// Built-in sub-linear functionals Xi: V -> W with ||Xi(v)||_W <= c1 ||v||_V2 + c2.
/// Every functional is `base(v) + shift`; a nonzero shift on a scalar base is
/// the affine shift Xi_w = Xi + w.
class Functional {
 public:
  enum class Kind { IdentityV2, NormV2, Linear };

  static Functional identity();
  static Functional norm_v2();
  static Functional linear(std::vector<double> psi);
  /// Linear functional with psi = h * ones: the discrete integral.
  static Functional mass(const StateVector& shape);
  /// base(v) + w. Only scalar-valued bases may be shifted.
  static Functional shifted(Functional base, double w);
  /// Xi(v) = w, the affine shift of the zero functional.
  static Functional constant(double w, const StateVector& shape);

  Kind kind() const { return kind_; }
  double shift() const { return shift_; }
  std::span<const double> psi() const { return psi_; }
  bool scalar_valued() const { return kind_ != Kind::IdentityV2; }
  /// W dimension for states shaped like `shape`.
  std::size_t dim(const StateVector& shape) const;

  /// Sub-linearity constants with respect to the given V2 norm.
  double c1(const StateVector& shape, const NormAssignment& norms) const;
  double c2() const { return std::abs(shift_); }

  std::string name() const;

 private:
  Kind kind_ = Kind::NormV2;
  std::vector<double> psi_;
  double shift_ = 0.0;
};

/// Xi(v); NormV2 uses the V2 exponent from `norms`.
WValue apply(const Functional& xi, const StateVector& v, const NormAssignment& norms);

/// ||w||_W: the V2 norm on grid-valued W, |.| on scalar W.
double w_norm(const Functional& xi, const WValue& w, const StateVector& shape,
              const NormAssignment& norms);

struct QuadConfig {
  double tol = 1e-9;
  std::size_t max_evals = 100000;
  /// Bypass closed forms and integrate numerically (used for cross checks).
  bool force_numeric = false;
};

struct SegmentIntegralResult {
  WValue value;
  double abs_error_estimate = 0.0;
  std::size_t n_evals = 0;
};

/// Adaptive Simpson on [a, b] for vector-valued integrands; the error
/// estimate is the max-norm of the Richardson difference. Throws
/// QuadratureBudgetExceeded past `max_evals` evaluations.
SegmentIntegralResult adaptive_simpson(const std::function<WValue(double)>& f, double a, double b,
                                       double tol, std::size_t max_evals);

/// Closed-form integral of ((c - kappa tau)_+)^(1/rho) over [0, delta].
double power_law_integral(double c, double kappa, double rho, double delta);

/// int_0^delta Xi(T(tau) state) dtau for every functional in `xis`, using a
/// shared subdivision so that linear relations between functionals survive
/// quadrature exactly. `flow` must be the flow of `state`.
std::vector<SegmentIntegralResult> integrate_segment(std::span<const Functional> xis, Flow& flow,
                                                     double delta, const Semigroup& sg,
                                                     const QuadConfig& quad);

SegmentIntegralResult integrate_segment(const Functional& xi, const StateVector& state,
                                        double delta, const Semigroup& sg, const QuadConfig& quad);

/// One chain step inside a cycle: the state after a jump and the holding
/// time before the next one.
struct SegmentSpec {
  StateVector state;
  double duration = 0.0;
};

/// Sum of segment integrals across one cycle.
WValue integrate_cycle(const Functional& xi, std::span<const SegmentSpec> segments,
                       const Semigroup& sg, const QuadConfig& quad);

}  // namespace regen
