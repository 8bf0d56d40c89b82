#include "regen/semigroup.hpp"

#include <cmath>

#include "regen/errors.hpp"

namespace regen {

void ExtinctionParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
}

double scalar_extinction_time(const ExtinctionParams& params, const StateVector& v) {
  if (!v.is_scalar()) throw ConfigError("scalar_extinction_time needs a scalar state");
  return std::pow(std::abs(v.value()), params.rho) / params.kappa;
}

double scalar_power_law(const ExtinctionParams& params, double v, double t) {
  if (t == 0.0 || v == 0.0) return v;
  const double base = std::pow(std::abs(v), params.rho) - params.kappa * t;
  if (base <= 0.0) return 0.0;
  return std::copysign(std::pow(base, 1.0 / params.rho), v);
}

Flow::Flow(ExtinctionParams params, StateVector v)
    : initial_(std::move(v)), scalar_(params) {}

Flow::Flow(const PLaplaceProblem& problem, StateVector v) : initial_(v) {
  trajectory_.emplace(problem, std::move(v));
}

StateVector Flow::at(double tau) {
  if (!(tau >= 0.0)) throw ConfigError("flow time must be >= 0");
  if (scalar_) return StateVector::scalar(scalar_power_law(*scalar_, initial_.value(), tau));
  return trajectory_->at(tau);
}

std::optional<double> Flow::extinction_time() const {
  if (scalar_) return scalar_extinction_time(*scalar_, initial_);
  return std::nullopt;
}

Semigroup Semigroup::scalar_power_law(ExtinctionParams params) {
  params.validate();
  return Semigroup(params, NormAssignment{});
}

Semigroup Semigroup::plaplace(std::shared_ptr<const PLaplaceProblem> problem, double q_v2) {
  if (!problem) throw ConfigError("null p-Laplacian problem");
  if (!(q_v2 >= 1.0)) throw ConfigError("V2 exponent q must be >= 1");
  return Semigroup(std::move(problem), NormAssignment{1.0, 2.0, q_v2});
}

void Semigroup::check_state(const StateVector& v) const {
  if (is_scalar()) {
    if (!v.is_scalar()) throw ConfigError("scalar semigroup needs a scalar state");
  } else {
    plaplace_problem().check_state(v);
  }
}

StateVector Semigroup::zero_state() const {
  if (is_scalar()) return StateVector::scalar(0.0);
  const auto& grid = plaplace_problem().grid();
  return StateVector::grid(std::vector<double>(static_cast<std::size_t>(grid.n_cells), 0.0),
                           grid.h());
}

StateVector Semigroup::evolve(const StateVector& v, double t) const {
  check_state(v);
  if (!(t >= 0.0)) throw ConfigError("evolve: t must be >= 0");
  if (is_scalar()) return StateVector::scalar(regen::scalar_power_law(scalar_params(), v.value(), t));
  return evolve_plaplace(v, t, plaplace_problem());
}

Flow Semigroup::flow(StateVector v) const {
  check_state(v);
  if (is_scalar()) return Flow(scalar_params(), std::move(v));
  return Flow(plaplace_problem(), std::move(v));
}

StateVector evolve(const Semigroup& sg, const StateVector& v, double t) { return sg.evolve(v, t); }

AxiomReport check_semigroup_axioms(const Semigroup& sg, std::span<const AxiomSample> samples) {
  if (samples.empty()) throw ConfigError("check_semigroup_axioms: empty sample list");
  AxiomReport report;
  report.residuals.reserve(samples.size());
  for (const auto& smp : samples) {
    AxiomResidual res;
    const StateVector whole = sg.evolve(smp.v, smp.t + smp.s);
    const StateVector composed = sg.evolve(sg.evolve(smp.v, smp.s), smp.t);
    res.semigroup = sg.norm_v(whole - composed);

    const StateVector u = smp.u ? *smp.u : sg.zero_state();
    res.contraction =
        sg.norm_v(sg.evolve(u, smp.t) - sg.evolve(smp.v, smp.t)) - sg.norm_v(u - smp.v);
    res.identity = sg.norm_v(sg.evolve(smp.v, 0.0) - smp.v);

    report.max_semigroup = std::max(report.max_semigroup, res.semigroup);
    report.max_contraction = std::max(report.max_contraction, res.contraction);
    report.max_identity = std::max(report.max_identity, res.identity);
    report.residuals.push_back(res);
  }
  return report;
}

}  // namespace regen
