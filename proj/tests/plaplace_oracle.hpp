#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace regen_test {

// Test-only oracle pieces, written against the energy definition rather than
// the solver internals.
struct OracleProblem {
  std::vector<double> gamma;
  double h, p, dt, eps;
};

inline double oracle_energy(const OracleProblem& op, const std::vector<double>& w,
                            const std::vector<double>& u) {
  double e = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) e += 0.5 * (w[i] - u[i]) * (w[i] - u[i]) * op.h;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    const double d = (w[k + 1] - w[k]) / op.h;
    e += op.dt / op.p * op.gamma[k] * std::pow(d * d + op.eps * op.eps, op.p / 2.0) * op.h;
  }
  return e;
}

// Gradient of the energy, from the definition.
inline std::vector<double> oracle_gradient(const OracleProblem& op, const std::vector<double>& w,
                                           const std::vector<double>& u) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double gi = (w[i] - u[i]) * op.h;
    auto flux = [&](std::size_t k) {
      const double d = (w[k + 1] - w[k]) / op.h;
      return op.gamma[k] * std::pow(d * d + op.eps * op.eps, (op.p - 2.0) / 2.0) * d;
    };
    if (i + 1 < w.size()) gi -= op.dt * flux(i);
    if (i > 0) gi += op.dt * flux(i - 1);
    g[i] = gi;
  }
  return g;
}

// Projected gradient descent with Barzilai-Borwein steps and Armijo
// backtracking; the projection removes the mean so iterates keep u's mass.
inline std::vector<double> projected_gradient_minimizer(const OracleProblem& op,
                                                        const std::vector<double>& u, double tol) {
  std::vector<double> w = u;
  auto project = [](std::vector<double> g) {
    double m = 0.0;
    for (double v : g) m += v;
    m /= static_cast<double>(g.size());
    for (double& v : g) v -= m;
    return g;
  };
  std::vector<double> g = project(oracle_gradient(op, w, u));
  double step = 1e-3;
  for (int it = 0; it < 200000; ++it) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax / op.h < tol) break;
    const double e0 = oracle_energy(op, w, u);
    std::vector<double> w_new(w.size());
    double s = step;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < w.size(); ++i) w_new[i] = w[i] - s * g[i];
      double gg = 0.0;
      for (double v : g) gg += v * v;
      if (oracle_energy(op, w_new, u) <= e0 - 1e-4 * s * gg || s < 1e-300) break;
      s *= 0.5;
    }
    std::vector<double> g_new = project(oracle_gradient(op, w_new, u));
    double sy = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double si = w_new[i] - w[i];
      const double yi = g_new[i] - g[i];
      sy += si * yi;
      ss += si * si;
    }
    step = sy > 0.0 ? ss / sy : 1e-3;
    w = std::move(w_new);
    g = std::move(g_new);
  }
  return w;
}

}  // namespace regen_test
