#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "regen/rng.hpp"
#include "regen/state.hpp"

namespace regen {

// Inter-jump time laws. Every law has support in (0, inf) and finite moments
// of all orders.
namespace beta_law {
struct Deterministic {
  double value;
};
struct Uniform {
  double lo;
  double hi;
};
struct Exponential {
  double rate;
};
struct Gamma {
  double shape;
  double scale;
};
}  // namespace beta_law

class BetaLaw {
 public:
  using Kind = std::variant<beta_law::Deterministic, beta_law::Uniform, beta_law::Exponential,
                            beta_law::Gamma>;

  BetaLaw(Kind kind);  // NOLINT(google-explicit-constructor)

  const Kind& kind() const { return kind_; }
  bool is_deterministic() const;
  double mean() const;
  /// E[beta^k], closed form for every law.
  double moment(double k) const;
  std::string describe() const;

 private:
  Kind kind_;
};

double sample_beta(const BetaLaw& law, Philox& rng);

// Jump laws.
namespace eta_law {
/// eta uniform on [-amp, amp].
struct ScalarUniform {
  double amp;
};
/// eta identically equal to `value`; used for deterministic oracles.
struct ScalarConstant {
  double value;
};
/// Sum of `k` Gaussian bumps with amplitudes uniform on [-amp_max, amp_max],
/// centres uniform on the domain and widths uniform on [width_min,
/// width_max]; projected to zero mean.
struct GridBumps {
  int k;
  double amp_max;
  double width_min;
  double width_max;
};
}  // namespace eta_law

class EtaLaw {
 public:
  using Kind = std::variant<eta_law::ScalarUniform, eta_law::ScalarConstant, eta_law::GridBumps>;

  EtaLaw(Kind kind);  // NOLINT(google-explicit-constructor)

  const Kind& kind() const { return kind_; }
  SpaceTag space() const;
  bool is_deterministic() const;
  /// Almost-sure bound on the sup norm of a draw.
  double sup_bound() const;
  /// E[|eta|^k] for scalar laws; nullopt where no closed form is offered.
  std::optional<double> abs_moment(double k) const;
  std::string describe() const;

 private:
  Kind kind_;
};

/// Draws one jump with the shape (tag, size, h) of `shape`. Throws
/// ConfigError when the law's space does not match.
StateVector sample_eta(const EtaLaw& law, Philox& rng, const StateVector& shape);

struct DriverConfig {
  BetaLaw beta;
  EtaLaw eta;
  std::uint64_t master_seed = 0;
};

struct DriftEstimate {
  double lhs_estimate = 0.0;
  /// 99% confidence half-width; zero for deterministic inputs.
  double ci_halfwidth = 0.0;
  bool exact = false;
  bool ok = false;
  double mean_beta = 0.0;
  double mean_eta_rho = 0.0;
};

/// Estimates -kappa E[beta] + E[||eta||_{V1}^rho] by Monte Carlo. Grid
/// jumps must be zero-mean since V1 is the zero-mean subspace.
DriftEstimate check_drift_condition(const DriverConfig& cfg, double kappa, double rho,
                                    const NormAssignment& norms, const StateVector& shape,
                                    std::uint64_t n_mc);

struct MomentCheck {
  std::string name;
  double order = 0.0;
  double empirical = 0.0;
  std::optional<double> analytic;
  double standard_error = 0.0;
  bool finite = false;
  bool ok = false;
};

/// Empirical E[beta^12] and E[||eta||_{V2}^4]; compared with closed forms
/// within three standard errors where available.
std::vector<MomentCheck> check_moments(const DriverConfig& cfg, const NormAssignment& norms,
                                       const StateVector& shape, std::uint64_t n_draws);

}  // namespace regen
