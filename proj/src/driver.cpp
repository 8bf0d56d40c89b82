#include "regen/driver.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "regen/errors.hpp"

namespace regen {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kZ99 = 2.5758293035489004;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be positive and finite");
  }
}

}  // namespace

BetaLaw::BetaLaw(Kind kind) : kind_(kind) {
  std::visit(overloaded{
                 [](const beta_law::Deterministic& d) { require_positive(d.value, "beta value"); },
                 [](const beta_law::Uniform& u) {
                   require_positive(u.lo, "beta uniform lower bound");
                   require_positive(u.hi, "beta uniform upper bound");
                   if (u.hi < u.lo) throw ConfigError("beta uniform needs lo <= hi");
                 },
                 [](const beta_law::Exponential& e) { require_positive(e.rate, "beta rate"); },
                 [](const beta_law::Gamma& g) {
                   require_positive(g.shape, "beta gamma shape");
                   require_positive(g.scale, "beta gamma scale");
                 },
             },
             kind_);
}

bool BetaLaw::is_deterministic() const {
  if (std::holds_alternative<beta_law::Deterministic>(kind_)) return true;
  if (const auto* u = std::get_if<beta_law::Uniform>(&kind_)) return u->lo == u->hi;
  return false;
}

double BetaLaw::mean() const { return moment(1.0); }

double BetaLaw::moment(double k) const {
  return std::visit(
      overloaded{
          [k](const beta_law::Deterministic& d) { return std::pow(d.value, k); },
          [k](const beta_law::Uniform& u) {
            if (u.lo == u.hi) return std::pow(u.lo, k);
            return (std::pow(u.hi, k + 1.0) - std::pow(u.lo, k + 1.0)) /
                   ((k + 1.0) * (u.hi - u.lo));
          },
          [k](const beta_law::Exponential& e) {
            return std::exp(std::lgamma(k + 1.0)) / std::pow(e.rate, k);
          },
          [k](const beta_law::Gamma& g) {
            return std::pow(g.scale, k) * std::exp(std::lgamma(g.shape + k) - std::lgamma(g.shape));
          },
      },
      kind_);
}

std::string BetaLaw::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const beta_law::Deterministic& d) { os << "deterministic(" << d.value << ")"; },
                 [&](const beta_law::Uniform& u) { os << "uniform(" << u.lo << ", " << u.hi << ")"; },
                 [&](const beta_law::Exponential& e) { os << "exponential(rate=" << e.rate << ")"; },
                 [&](const beta_law::Gamma& g) {
                   os << "gamma(shape=" << g.shape << ", scale=" << g.scale << ")";
                 },
             },
             kind_);
  return os.str();
}

double sample_beta(const BetaLaw& law, Philox& rng) {
  return std::visit(
      overloaded{
          [](const beta_law::Deterministic& d) { return d.value; },
          [&rng](const beta_law::Uniform& u) {
            if (u.lo == u.hi) return u.lo;
            // (lo, hi]: stays strictly positive.
            return u.lo + (u.hi - u.lo) * rng.uniform_pos();
          },
          [&rng](const beta_law::Exponential& e) { return sample_exponential(rng, e.rate); },
          [&rng](const beta_law::Gamma& g) { return sample_gamma(rng, g.shape, g.scale); },
      },
      law.kind());
}

EtaLaw::EtaLaw(Kind kind) : kind_(kind) {
  std::visit(overloaded{
                 [](const eta_law::ScalarUniform& u) {
                   if (!(u.amp >= 0.0) || !std::isfinite(u.amp)) {
                     throw ConfigError("eta amplitude must be finite and >= 0");
                   }
                 },
                 [](const eta_law::ScalarConstant& c) {
                   if (!std::isfinite(c.value)) throw ConfigError("eta value must be finite");
                 },
                 [](const eta_law::GridBumps& b) {
                   if (b.k < 1) throw ConfigError("grid bumps need k >= 1");
                   if (!(b.amp_max >= 0.0) || !std::isfinite(b.amp_max)) {
                     throw ConfigError("grid bump amplitude must be finite and >= 0");
                   }
                   require_positive(b.width_min, "bump width_min");
                   require_positive(b.width_max, "bump width_max");
                   if (b.width_max < b.width_min) throw ConfigError("bump widths need min <= max");
                 },
             },
             kind_);
}

SpaceTag EtaLaw::space() const {
  return std::holds_alternative<eta_law::GridBumps>(kind_) ? SpaceTag::Grid : SpaceTag::Scalar;
}

bool EtaLaw::is_deterministic() const {
  if (std::holds_alternative<eta_law::ScalarConstant>(kind_)) return true;
  if (const auto* u = std::get_if<eta_law::ScalarUniform>(&kind_)) return u->amp == 0.0;
  if (const auto* b = std::get_if<eta_law::GridBumps>(&kind_)) return b->amp_max == 0.0;
  return false;
}

double EtaLaw::sup_bound() const {
  return std::visit(overloaded{
                        [](const eta_law::ScalarUniform& u) { return u.amp; },
                        [](const eta_law::ScalarConstant& c) { return std::abs(c.value); },
                        // each bump is bounded by amp_max; projection at most doubles it
                        [](const eta_law::GridBumps& b) { return 2.0 * b.k * b.amp_max; },
                    },
                    kind_);
}

std::optional<double> EtaLaw::abs_moment(double k) const {
  return std::visit(overloaded{
                        [k](const eta_law::ScalarUniform& u) -> std::optional<double> {
                          return std::pow(u.amp, k) / (k + 1.0);
                        },
                        [k](const eta_law::ScalarConstant& c) -> std::optional<double> {
                          return std::pow(std::abs(c.value), k);
                        },
                        [](const eta_law::GridBumps&) -> std::optional<double> {
                          return std::nullopt;
                        },
                    },
                    kind_);
}

std::string EtaLaw::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const eta_law::ScalarUniform& u) { os << "scalar_uniform(amp=" << u.amp << ")"; },
                 [&](const eta_law::ScalarConstant& c) { os << "scalar_constant(" << c.value << ")"; },
                 [&](const eta_law::GridBumps& b) {
                   os << "grid_bumps(k=" << b.k << ", amp_max=" << b.amp_max << ", width=["
                      << b.width_min << ", " << b.width_max << "])";
                 },
             },
             kind_);
  return os.str();
}

StateVector sample_eta(const EtaLaw& law, Philox& rng, const StateVector& shape) {
  if (law.space() != shape.tag()) throw ConfigError("eta law does not match the state space");
  return std::visit(
      overloaded{
          [&](const eta_law::ScalarUniform& u) {
            if (u.amp == 0.0) return StateVector::scalar(0.0);
            return StateVector::scalar(u.amp * (2.0 * rng.uniform() - 1.0));
          },
          [&](const eta_law::ScalarConstant& c) { return StateVector::scalar(c.value); },
          [&](const eta_law::GridBumps& b) {
            StateVector out = StateVector::zeros_like(shape);
            const double h = shape.h();
            const double length = h * static_cast<double>(shape.size());
            for (int j = 0; j < b.k; ++j) {
              const double amp = b.amp_max * (2.0 * rng.uniform() - 1.0);
              const double centre = length * rng.uniform();
              const double width = b.width_min + (b.width_max - b.width_min) * rng.uniform();
              for (std::size_t i = 0; i < out.size(); ++i) {
                const double x = (static_cast<double>(i) + 0.5) * h;
                const double z = (x - centre) / width;
                out[i] += amp * std::exp(-z * z);
              }
            }
            const double m = mean(out);
            for (double& x : out.values()) x -= m;
            return out;
          },
      },
      law.kind());
}

DriftEstimate check_drift_condition(const DriverConfig& cfg, double kappa, double rho,
                                    const NormAssignment& norms, const StateVector& shape,
                                    std::uint64_t n_mc) {
  if (!(kappa > 0.0)) throw ConfigError("drift check needs kappa > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("drift check needs rho in (0, 1)");
  DriftEstimate est;
  if (cfg.beta.is_deterministic() && cfg.eta.is_deterministic()) {
    Philox beta_rng = derive_stream(cfg.master_seed, 0, Stream::Beta);
    Philox eta_rng = derive_stream(cfg.master_seed, 0, Stream::Eta);
    est.mean_beta = sample_beta(cfg.beta, beta_rng);
    est.mean_eta_rho = std::pow(norms.v1(sample_eta(cfg.eta, eta_rng, shape)), rho);
    est.lhs_estimate = -kappa * est.mean_beta + est.mean_eta_rho;
    est.exact = true;
    est.ok = est.lhs_estimate < 0.0;
    return est;
  }
  if (n_mc < 10000) throw ConfigError("drift check needs n_mc >= 1e4");

  // Stream index ~0 keeps the check away from replicate streams.
  constexpr std::uint64_t kDriftStream = ~std::uint64_t{0};
  Philox beta_rng = derive_stream(cfg.master_seed, kDriftStream, Stream::Beta);
  Philox eta_rng = derive_stream(cfg.master_seed, kDriftStream, Stream::Eta);
  double sum = 0.0, sum_sq = 0.0, sum_beta = 0.0, sum_eta = 0.0;
  for (std::uint64_t i = 0; i < n_mc; ++i) {
    const double b = sample_beta(cfg.beta, beta_rng);
    const StateVector eta = sample_eta(cfg.eta, eta_rng, shape);
    if (!eta.is_scalar() && std::abs(mean(eta)) > 1e-12 * std::max(1.0, norm_inf(eta))) {
      throw ConfigError("grid jumps must be zero-mean to lie in V1");
    }
    const double e = std::pow(norms.v1(eta), rho);
    const double z = -kappa * b + e;
    sum += z;
    sum_sq += z * z;
    sum_beta += b;
    sum_eta += e;
  }
  const double n = static_cast<double>(n_mc);
  est.lhs_estimate = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.lhs_estimate * est.lhs_estimate) / (n - 1.0));
  est.ci_halfwidth = kZ99 * std::sqrt(var / n);
  est.mean_beta = sum_beta / n;
  est.mean_eta_rho = sum_eta / n;
  est.ok = est.lhs_estimate + est.ci_halfwidth < 0.0;
  return est;
}

std::vector<MomentCheck> check_moments(const DriverConfig& cfg, const NormAssignment& norms,
                                       const StateVector& shape, std::uint64_t n_draws) {
  constexpr std::uint64_t kMomentStream = ~std::uint64_t{0} - 1;
  Philox beta_rng = derive_stream(cfg.master_seed, kMomentStream, Stream::Beta);
  Philox eta_rng = derive_stream(cfg.master_seed, kMomentStream, Stream::Eta);

  auto summarize = [&](std::string name, double order, const std::vector<double>& draws,
                       std::optional<double> analytic, std::optional<double> analytic_double) {
    MomentCheck mc;
    mc.name = std::move(name);
    mc.order = order;
    mc.analytic = analytic;
    double s = 0.0, s2 = 0.0;
    for (double d : draws) {
      s += d;
      s2 += d * d;
    }
    const double n = static_cast<double>(draws.size());
    mc.empirical = s / n;
    mc.finite = std::isfinite(mc.empirical) && std::isfinite(s2);
    // Standard error from the analytic 2k-th moment when available, since
    // the sample version is unreliable for high moments.
    double var = analytic && analytic_double ? *analytic_double - *analytic * *analytic
                                             : (s2 / n - mc.empirical * mc.empirical);
    mc.standard_error = std::sqrt(std::max(0.0, var) / n);
    if (!mc.finite) {
      mc.ok = false;
    } else if (analytic) {
      mc.ok = std::abs(mc.empirical - *analytic) <=
              3.0 * mc.standard_error + 1e-12 * std::max(1.0, std::abs(*analytic));
    } else {
      mc.ok = true;
    }
    return mc;
  };

  std::vector<double> betas(n_draws), etas(n_draws);
  for (auto& b : betas) b = std::pow(sample_beta(cfg.beta, beta_rng), 12.0);
  for (auto& e : etas) e = std::pow(norms.v2(sample_eta(cfg.eta, eta_rng, shape)), 4.0);

  std::vector<MomentCheck> out;
  out.push_back(summarize("beta", 12.0, betas, cfg.beta.moment(12.0), cfg.beta.moment(24.0)));
  out.push_back(summarize("eta_v2", 4.0, etas, cfg.eta.abs_moment(4.0), cfg.eta.abs_moment(8.0)));
  return out;
}

}  // namespace regen
