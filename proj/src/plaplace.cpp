#include "regen/plaplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "regen/errors.hpp"

namespace regen {

void Grid1D::validate() const {
  if (n_cells < 2) throw ConfigError("grid needs n_cells >= 2");
  if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("grid length must be > 0");
}

WeightField WeightField::constant(const Grid1D& grid, double value) {
  return WeightField{std::vector<double>(static_cast<std::size_t>(grid.n_cells - 1), value)};
}

double WeightField::min() const { return *std::min_element(gamma.begin(), gamma.end()); }
double WeightField::max() const { return *std::max_element(gamma.begin(), gamma.end()); }

void WeightField::validate(const Grid1D& grid) const {
  if (gamma.size() != static_cast<std::size_t>(grid.n_cells - 1)) {
    throw ConfigError("weight field needs n_cells - 1 edge values");
  }
  for (double g : gamma) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("weights must be positive and finite");
  }
}

void PLaplaceConfig::validate() const {
  if (!(p > 1.0 && p < 2.0)) throw ConfigError("p must lie in (1, 2)");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(eps_reg >= 0.0)) throw ConfigError("eps_reg must be >= 0");
  if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be > 0");
  if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be >= 1");
}

PLaplaceProblem::PLaplaceProblem(Grid1D grid, WeightField weights, PLaplaceConfig cfg)
    : grid_(grid), weights_(std::move(weights)), cfg_(cfg) {
  grid_.validate();
  weights_.validate(grid_);
  cfg_.validate();
  eps_ext_ = cfg_.eps_ext > 0.0 ? cfg_.eps_ext : 1e-12 * std::sqrt(grid_.length);
}

void PLaplaceProblem::check_state(const StateVector& u) const {
  if (u.tag() != SpaceTag::Grid || u.size() != static_cast<std::size_t>(grid_.n_cells)) {
    throw ConfigError("state does not match the grid");
  }
}

namespace {

// phi_eps(s) = (s^2 + eps^2)^((p-2)/2) s
// r2^((p-4)/2); p = 1.5 is the default and avoids pow
double base_power(double r2, double p) {
  if (p == 1.5) return 1.0 / (r2 * std::sqrt(std::sqrt(r2)));
  return std::pow(r2, 0.5 * (p - 4.0));
}

double flux_law(double s, double p, double eps) {
  if (s == 0.0) return 0.0;
  const double r2 = s * s + eps * eps;
  return base_power(r2, p) * r2 * s;
}

// phi_eps'(s) = (s^2 + eps^2)^((p-4)/2) ((p-1) s^2 + eps^2), capped where it
// blows up (eps = 0 and s = 0).
double flux_slope(double s, double p, double eps) {
  constexpr double kCap = 1e30;
  const double r2 = s * s + eps * eps;
  if (r2 == 0.0) return kCap;
  const double v = base_power(r2, p) * ((p - 1.0) * s * s + eps * eps);
  return std::min(v, kCap);
}

// residual r = w - u + dt A_h w
void step_residual(std::span<const double> w, std::span<const double> u, double h, double dt,
                   const WeightField& weights, double p, double eps, std::vector<double>& r) {
  const std::size_t n = w.size();
  r.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) r[i] = w[i] - u[i];
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double flux = weights.gamma[e] * flux_law((w[e + 1] - w[e]) / h, p, eps);
    // -(F_{i+1/2} - F_{i-1/2}) / h
    r[e] -= dt * flux / h;
    r[e + 1] += dt * flux / h;
  }
}

double sup_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

// Energy divided by h.
double scaled_energy(std::span<const double> w, std::span<const double> u, double h, double dt,
                     const WeightField& weights, double p, double eps) {
  double quad = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - u[i];
    quad += d * d;
  }
  double grad = 0.0;
  for (std::size_t e = 0; e + 1 < w.size(); ++e) {
    const double s = (w[e + 1] - w[e]) / h;
    grad += weights.gamma[e] * std::pow(s * s + eps * eps, 0.5 * p);
  }
  return 0.5 * quad + dt / p * grad;
}

// Solves the symmetric tridiagonal system (diag, off) x = rhs in place.
bool solve_tridiagonal(std::vector<double> diag, std::span<const double> off,
                       std::vector<double>& x) {
  const std::size_t n = diag.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      diag[i] -= off[i - 1] * c[i - 1];
      x[i] -= off[i - 1] * x[i - 1];
    }
    if (!(diag[i] > 0.0) || !std::isfinite(diag[i])) return false;
    if (i + 1 < n) c[i] = off[i] / diag[i];
    x[i] /= diag[i];
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

// Inverse of phi_eps on s >= 0. phi_eps is concave there, so Newton started
// from the eps = 0 root (which lies below) increases monotonically.
double inverse_flux_abs(double f, double p, double eps) {
  if (f == 0.0) return 0.0;
  double s = p == 1.5 ? f * f : std::pow(f, 1.0 / (p - 1.0));
  if (eps == 0.0) return s;
  for (int it = 0; it < 100; ++it) {
    const double r2 = s * s + eps * eps;
    const double b = base_power(r2, p);
    const double ds = (f - b * r2 * s) / (b * ((p - 1.0) * s * s + eps * eps));
    if (!(ds > 0.0)) break;
    s += ds;
    if (ds <= 1e-16 * s) break;
  }
  return s;
}

// Warm start from the flux form of the step. With F the edge fluxes,
// w = u + (dt/h) div F and D w = phi^{-1}(F / gamma); for p < 2 the inverse
// flux law is smooth, so Newton on the fluxes converges in a few iterations
// where the primal iteration crawls through the regularized kink.
void flux_form_predictor(std::span<const double> u, double h, double dt,
                         const WeightField& weights, double p, double eps,
                         std::vector<double>& w) {
  const std::size_t n = u.size();
  const std::size_t m = n - 1;
  const double c = dt / h;
  std::vector<double> F(m, 0.0), s(m), g(m), diag(m), off(m > 0 ? m - 1 : 0), d(m), trial(m);

  auto primal = [&](std::span<const double> flux, std::vector<double>& out) {
    out.assign(u.begin(), u.end());
    for (std::size_t e = 0; e < m; ++e) {
      out[e] += c * flux[e];
      out[e + 1] -= c * flux[e];
    }
  };
  // gradient of the (convex) flux-form energy
  auto gradient = [&](std::span<const double> flux, std::vector<double>& grad) {
    primal(flux, w);
    for (std::size_t e = 0; e < m; ++e) {
      const double a = flux[e] / weights.gamma[e];
      const double se = std::copysign(inverse_flux_abs(std::abs(a), p, eps), a);
      s[e] = se;
      grad[e] = h * se - (w[e + 1] - w[e]);
    }
  };
  // flux-form energy, up to a constant
  auto energy = [&](std::span<const double> flux) {
    double val = 0.0;
    double prev = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const double a = flux[e] / weights.gamma[e];
      const double se = inverse_flux_abs(std::abs(a), p, eps);
      const double r2 = se * se + eps * eps;
      const double conj = std::abs(a) * se - (r2 * r2 * base_power(r2, p) -
                                              std::pow(eps, p)) / p;
      val += h * weights.gamma[e] * conj;
      val += 0.5 * c * (flux[e] - prev) * (flux[e] - prev);
      val -= (u[e + 1] - u[e]) * flux[e];
      prev = flux[e];
    }
    return val + 0.5 * c * prev * prev;
  };

  gradient(F, g);
  double e0 = energy(F);
  for (int it = 0; it < 100; ++it) {
    for (std::size_t e = 0; e < m; ++e) {
      diag[e] = 2.0 * c + h / (weights.gamma[e] * flux_slope(s[e], p, eps));
      if (e + 1 < m) off[e] = -c;
      d[e] = -g[e];
    }
    if (!solve_tridiagonal(diag, off, d)) return;
    double slope = 0.0, dmax = 0.0, fmax = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      slope += g[e] * d[e];
      dmax = std::max(dmax, std::abs(d[e]));
      fmax = std::max(fmax, std::abs(F[e]));
    }
    if (!(slope < 0.0)) return;
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      for (std::size_t e = 0; e < m; ++e) trial[e] = F[e] + alpha * d[e];
      const double e1 = energy(trial);
      if (e1 <= e0 + 1e-4 * alpha * slope || alpha * dmax <= 1e-15 * fmax) {
        e0 = e1;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    std::swap(F, trial);
    gradient(F, g);
    if (alpha * dmax <= 1e-15 * std::max(fmax, 1e-300)) break;
  }
  primal(F, w);
}

}  // namespace

StateVector apply_discrete_operator(const StateVector& u, const Grid1D& grid,
                                    const WeightField& weights, double p, double eps_reg) {
  if (u.tag() != SpaceTag::Grid || u.size() != static_cast<std::size_t>(grid.n_cells) ||
      weights.gamma.size() + 1 != u.size()) {
    throw ConfigError("apply_discrete_operator: dimension mismatch");
  }
  const double h = grid.h();
  StateVector out = StateVector::zeros_like(u);
  for (std::size_t e = 0; e + 1 < u.size(); ++e) {
    const double flux = weights.gamma[e] * flux_law((u[e + 1] - u[e]) / h, p, eps_reg);
    out[e] -= flux / h;
    out[e + 1] += flux / h;
  }
  return out;
}

double step_energy(const StateVector& w, const StateVector& u, const PLaplaceProblem& problem,
                   double dt) {
  problem.check_state(w);
  problem.check_state(u);
  const auto& cfg = problem.config();
  const double h = problem.grid().h();
  return h * scaled_energy(w.values(), u.values(), h, dt, problem.weights(), cfg.p, cfg.eps_reg);
}

StateVector implicit_euler_step(const StateVector& u, const PLaplaceProblem& problem,
                                StepStats* stats) {
  return implicit_euler_step(u, problem, problem.config().dt, stats);
}

StateVector implicit_euler_step(const StateVector& u, const PLaplaceProblem& problem, double dt,
                                StepStats* stats) {
  problem.check_state(u);
  if (!u.all_finite()) throw ConfigError("implicit_euler_step: non-finite state");
  const auto& cfg = problem.config();
  const auto& weights = problem.weights();
  const double h = problem.grid().h();
  const double p = cfg.p;
  const double eps = cfg.eps_reg;
  const std::size_t n = u.size();
  const double coupling = dt / (h * h);

  StateVector w = u;
  std::vector<double> r, r_trial, d(n), diag(n), off(n - 1);
  StepStats local;
  StepStats& st = stats ? *stats : local;
  st = StepStats{};

  // absolute plus relative: the rounding floor grows with |u|
  const double tol = cfg.newton_tol * (1.0 + sup_norm(u.values()));
  step_residual(w.values(), u.values(), h, dt, weights, p, eps, r);
  double res = sup_norm(r);
  if (res > tol) {
    std::vector<double> guess;
    flux_form_predictor(u.values(), h, dt, weights, p, eps, guess);
    std::vector<double> r_guess;
    step_residual(guess, u.values(), h, dt, weights, p, eps, r_guess);
    if (sup_norm(r_guess) < res) {
      std::copy(guess.begin(), guess.end(), w.values().begin());
      r = std::move(r_guess);
      res = sup_norm(r);
    }
  }
  double energy = scaled_energy(w.values(), u.values(), h, dt, weights, p, eps);

  StateVector trial = w;
  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    if (res <= tol) {
      st.iterations = it;
      st.residual = res;
      return w;
    }

    // Hessian / h = I + dt/h^2 * weighted graph Laplacian with slopes phi'.
    std::fill(diag.begin(), diag.end(), 1.0);
    for (std::size_t e = 0; e + 1 < n; ++e) {
      const double c = coupling * weights.gamma[e] * flux_slope((w[e + 1] - w[e]) / h, p, eps);
      diag[e] += c;
      diag[e + 1] += c;
      off[e] = -c;
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
    bool newton_ok = solve_tridiagonal(diag, off, d);
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += r[i] * d[i];
    if (!newton_ok || !(slope < 0.0)) {
      ++st.gradient_fallbacks;
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i] / diag[i];
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += r[i] * d[i];
    }

    // Once the predicted decrease is below what the energy can resolve in
    // floating point, backtrack on the residual instead.
    const bool energy_resolvable = -slope > 1e-13 * std::max(1.0, std::abs(energy));
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = w[i] + alpha * d[i];
      if (energy_resolvable) {
        const double e_trial = scaled_energy(trial.values(), u.values(), h, dt, weights, p, eps);
        if (e_trial <= energy + 1e-4 * alpha * slope) {
          step_residual(trial.values(), u.values(), h, dt, weights, p, eps, r_trial);
          energy = e_trial;
          accepted = true;
        }
      } else {
        step_residual(trial.values(), u.values(), h, dt, weights, p, eps, r_trial);
        if (sup_norm(r_trial) < res) {
          energy = scaled_energy(trial.values(), u.values(), h, dt, weights, p, eps);
          accepted = true;
        }
      }
      if (accepted) break;
    }
    if (!accepted) break;
    std::swap(w, trial);
    std::swap(r, r_trial);
    res = sup_norm(r);
  }
  if (res <= tol) {
    st.iterations = cfg.newton_max_iter;
    st.residual = res;
    return w;
  }
  std::ostringstream msg;
  msg << "implicit Euler step did not converge: residual " << res << " > tol " << tol
      << " (dt = " << dt << ")";
  throw NonConvergence(msg.str());
}

TimeSplit split_time(double t, double dt) {
  if (!(t >= 0.0)) throw ConfigError("evolution time must be >= 0");
  const double n = t / dt;
  const double k = std::nearbyint(n);
  if (std::abs(n - k) <= 1e-9 * std::max(1.0, n)) {
    return {static_cast<std::size_t>(k), 0.0};
  }
  const double whole = std::floor(n);
  TimeSplit split{static_cast<std::size_t>(whole), t - whole * dt};
  if (split.remainder < 1e-14) split.remainder = 0.0;
  return split;
}

PLaplaceTrajectory::PLaplaceTrajectory(const PLaplaceProblem& problem, StateVector u0)
    : problem_(&problem) {
  problem.check_state(u0);
  if (u0.is_zero()) extinct_index_ = 0;
  states_.push_back(std::move(u0));
}

const StateVector& PLaplaceTrajectory::grid_state(std::size_t k) {
  if (extinct_index_ && k >= *extinct_index_) return states_[*extinct_index_];
  while (states_.size() <= k) {
    StateVector next = implicit_euler_step(states_.back(), *problem_);
    if (norm_l2(next) < problem_->eps_ext()) next = StateVector::zeros_like(next);
    states_.push_back(std::move(next));
    if (states_.back().is_zero()) {
      extinct_index_ = states_.size() - 1;
      break;
    }
  }
  if (extinct_index_ && k >= *extinct_index_) return states_[*extinct_index_];
  return states_[k];
}

StateVector PLaplaceTrajectory::at_offset(std::size_t k, double r) {
  const StateVector& base = grid_state(k);
  if (r == 0.0 || base.is_zero()) return base;
  StateVector next = implicit_euler_step(base, *problem_, r);
  if (norm_l2(next) < problem_->eps_ext()) next = StateVector::zeros_like(next);
  return next;
}

StateVector PLaplaceTrajectory::at(double t) {
  const TimeSplit split = split_time(t, problem_->config().dt);
  return at_offset(split.full_steps, split.remainder);
}

StateVector evolve_plaplace(const StateVector& u, double t, const PLaplaceProblem& problem) {
  problem.check_state(u);
  const TimeSplit split = split_time(t, problem.config().dt);
  StateVector cur = u;
  for (std::size_t k = 0; k < split.full_steps && !cur.is_zero(); ++k) {
    cur = implicit_euler_step(cur, problem);
    if (norm_l2(cur) < problem.eps_ext()) cur = StateVector::zeros_like(cur);
  }
  if (split.remainder > 0.0 && !cur.is_zero()) {
    cur = implicit_euler_step(cur, problem, split.remainder);
    if (norm_l2(cur) < problem.eps_ext()) cur = StateVector::zeros_like(cur);
  }
  return cur;
}

StateVector project_zero_mean(const StateVector& u) {
  StateVector out = u;
  const double m = mean(u);
  for (double& x : out.values()) x -= m;
  return out;
}

KappaFit fit_extinction_rate(std::span<const DecayCurve> curves, double rho) {
  KappaFit fit;
  fit.rho_used = rho;
  double kappa = std::numeric_limits<double>::infinity();
  for (const auto& c : curves) {
    if (c.norm_rho.empty() || c.norm_rho.front() == 0.0) continue;
    ++fit.samples_used;
    const double start = c.norm_rho.front();
    for (std::size_t k = 1; k < c.times.size(); ++k) {
      if (c.norm_rho[k] == 0.0 || c.times[k] <= 0.0) continue;
      kappa = std::min(kappa, (start - c.norm_rho[k]) / c.times[k]);
    }
  }
  if (fit.samples_used == 0) throw ConfigError("fit_extinction_rate: no non-zero samples");
  fit.kappa_emp = std::isfinite(kappa) ? kappa : 0.0;
  for (const auto& c : curves) {
    if (c.norm_rho.empty() || c.norm_rho.front() == 0.0) continue;
    const double start = c.norm_rho.front();
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      const double bound = std::max(0.0, start - fit.kappa_emp * c.times[k]);
      fit.fit_residual = std::max(fit.fit_residual, c.norm_rho[k] - bound);
    }
  }
  fit.curves.assign(curves.begin(), curves.end());
  return fit;
}

KappaFit estimate_kappa(std::span<const StateVector> samples, const PLaplaceProblem& problem,
                        double time_cap) {
  const double rho = 2.0 - problem.config().p;
  const double dt = problem.config().dt;
  std::vector<DecayCurve> curves;
  curves.reserve(samples.size());
  for (const auto& u0 : samples) {
    problem.check_state(u0);
    if (std::abs(mean(u0)) > 1e-12 * std::max(1.0, norm_inf(u0))) {
      throw ConfigError("estimate_kappa: samples must be zero-mean");
    }
    DecayCurve curve;
    StateVector cur = u0;
    if (norm_l2(cur) < problem.eps_ext()) cur = StateVector::zeros_like(cur);
    curve.times.push_back(0.0);
    curve.norm_rho.push_back(std::pow(norm_l2(cur), rho));
    std::size_t k = 0;
    while (!cur.is_zero()) {
      ++k;
      const double t = static_cast<double>(k) * dt;
      if (t > time_cap) {
        std::ostringstream msg;
        msg << "sample did not extinguish before t = " << time_cap << " (L2 norm "
            << norm_l2(cur) << ")";
        throw NoExtinction(msg.str());
      }
      cur = implicit_euler_step(cur, problem);
      if (norm_l2(cur) < problem.eps_ext()) cur = StateVector::zeros_like(cur);
      curve.times.push_back(t);
      curve.norm_rho.push_back(std::pow(norm_l2(cur), rho));
    }
    curves.push_back(std::move(curve));
  }
  return fit_extinction_rate(curves, rho);
}

}  // namespace regen
