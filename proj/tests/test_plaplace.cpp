#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "regen/errors.hpp"
#include "regen/plaplace.hpp"
#include "regen/rng.hpp"
#include "plaplace_oracle.hpp"

using namespace regen;
using namespace regen_test;

namespace {

PLaplaceProblem make_problem(int n, std::vector<double> gamma, PLaplaceConfig cfg = {}) {
  Grid1D grid{n, 1.0};
  return PLaplaceProblem(grid, WeightField{std::move(gamma)}, cfg);
}

StateVector random_zero_mean(Philox& rng, int n, double amp, double h) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = amp * (2.0 * rng.uniform() - 1.0);
  return project_zero_mean(StateVector::grid(v, h));
}

std::vector<double> random_weights(Philox& rng, int n) {
  std::vector<double> g(static_cast<std::size_t>(n - 1));
  for (auto& x : g) x = 0.5 + 1.5 * rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("discrete operator: two-cell stencil matches finite differences of the energy") {
  const Grid1D grid{2, 2.0};  // h = 1
  const WeightField w{{1.0}};
  const StateVector u = StateVector::grid({0.0, 1.0}, 1.0);
  const StateVector au = apply_discrete_operator(u, grid, w, 1.5, 0.0);
  CHECK(au[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(au[1] == doctest::Approx(1.0).epsilon(1e-15));

  // independent check: (A u)_i = (1/h) dJ/du_i with J(u) = (1/p) sum gamma |Du|^p h
  auto J = [](double u0, double u1) { return std::pow(std::abs(u1 - u0), 1.5) / 1.5; };
  const double fd = 1e-6;
  const double d0 = (J(0.0 + fd, 1.0) - J(0.0 - fd, 1.0)) / (2 * fd);
  const double d1 = (J(0.0, 1.0 + fd) - J(0.0, 1.0 - fd)) / (2 * fd);
  CHECK(au[0] == doctest::Approx(d0).epsilon(1e-8));
  CHECK(au[1] == doctest::Approx(d1).epsilon(1e-8));
}

TEST_CASE("discrete operator: constants are equilibria and flux sums telescope") {
  Philox rng(3);
  const Grid1D grid{12, 1.5};
  const WeightField w{random_weights(rng, 12)};
  const StateVector c = StateVector::grid(std::vector<double>(12, 0.7), grid.h());
  CHECK(apply_discrete_operator(c, grid, w, 1.4, 1e-8).is_zero());
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(12);
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    const StateVector au = apply_discrete_operator(StateVector::grid(v, grid.h()), grid, w, 1.4, 1e-8);
    CHECK(std::abs(mass(au)) <= 1e-12);
  }
  CHECK_THROWS_AS(apply_discrete_operator(StateVector::grid({1.0, 2.0, 3.0}, grid.h()), grid, w, 1.4, 0.0),
                  ConfigError);
}

TEST_CASE("implicit step: constant state is a fixed point") {
  const auto problem = make_problem(8, std::vector<double>(7, 1.0));
  const StateVector c = StateVector::grid(std::vector<double>(8, -0.25), 1.0 / 8);
  CHECK(implicit_euler_step(c, problem) == c);
}

TEST_CASE("implicit step: odd symmetry") {
  Philox rng(5);
  auto gamma = random_weights(rng, 16);
  for (std::size_t i = 0; i < gamma.size() / 2; ++i) gamma[gamma.size() - 1 - i] = gamma[i];
  const auto problem = make_problem(16, gamma);
  const StateVector u = random_zero_mean(rng, 16, 1.0, 1.0 / 16);
  const StateVector a = implicit_euler_step(u, problem);
  const StateVector b = implicit_euler_step(-u, problem);
  CHECK(b == -a);
}

TEST_CASE("implicit step: Newton agrees with a projected-gradient oracle on 8 cells") {
  Philox rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gamma = random_weights(rng, 8);
    PLaplaceConfig cfg;
    const auto problem = make_problem(8, gamma, cfg);
    const StateVector u = random_zero_mean(rng, 8, 1.0, 1.0 / 8);
    const StateVector w = implicit_euler_step(u, problem);

    const OracleProblem op{gamma, 1.0 / 8, cfg.p, cfg.dt, cfg.eps_reg};
    const std::vector<double> uo(u.values().begin(), u.values().end());
    const auto oracle = projected_gradient_minimizer(op, uo, 1e-10);
    double diff = 0.0;
    for (std::size_t i = 0; i < 8; ++i) diff = std::max(diff, std::abs(oracle[i] - w[i]));
    CHECK(diff <= 1e-8);
  }
}

TEST_CASE("implicit step: a large step strictly shrinks a zero-mean profile") {
  Philox rng(19);
  const auto problem = make_problem(8, std::vector<double>(7, 1.0));
  const StateVector u = random_zero_mean(rng, 8, 1.0, 1.0 / 8);
  const StateVector w = implicit_euler_step(u, problem, 0.5);
  CHECK(norm_l2(w) < norm_l2(u));

  const OracleProblem op{std::vector<double>(7, 1.0), 1.0 / 8, 1.5, 0.5, 1e-8};
  const auto oracle = projected_gradient_minimizer(
      op, std::vector<double>(u.values().begin(), u.values().end()), 1e-10);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(oracle[i] - w[i]) <= 1e-8);
}

TEST_CASE("implicit step: iteration cap surfaces NonConvergence") {
  Philox rng(23);
  PLaplaceConfig cfg;
  cfg.newton_max_iter = 1;
  cfg.newton_tol = 1e-300;
  const auto problem = make_problem(16, std::vector<double>(15, 1.0), cfg);
  const StateVector u = random_zero_mean(rng, 16, 1.0, 1.0 / 16);
  CHECK_THROWS_AS(implicit_euler_step(u, problem), NonConvergence);
}

TEST_CASE("split_time treats near multiples of dt as exact") {
  CHECK(split_time(0.03, 0.01).full_steps == 3);
  CHECK(split_time(0.03, 0.01).remainder == 0.0);
  const TimeSplit s = split_time(0.035, 0.01);
  CHECK(s.full_steps == 3);
  CHECK(s.remainder == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(split_time(0.0, 0.01).full_steps == 0);
  CHECK_THROWS_AS(split_time(-1.0, 0.01), ConfigError);
}

TEST_CASE("evolve_plaplace basics") {
  Philox rng(29);
  const auto problem = make_problem(16, random_weights(rng, 16));
  const StateVector u = random_zero_mean(rng, 16, 0.5, 1.0 / 16);
  CHECK(evolve_plaplace(u, 0.0, problem) == u);
  const StateVector c = StateVector::grid(std::vector<double>(16, 2.0), 1.0 / 16);
  CHECK(evolve_plaplace(c, 0.37, problem) == c);
  CHECK(evolve_plaplace(u, 20.0, problem).is_zero());
}

TEST_CASE("trajectory evaluation agrees bit for bit with evolve_plaplace") {
  Philox rng(31);
  const auto problem = make_problem(16, random_weights(rng, 16));
  const StateVector u = random_zero_mean(rng, 16, 0.5, 1.0 / 16);
  PLaplaceTrajectory traj(problem, u);
  for (double t : {0.0, 0.005, 0.01, 0.0372, 0.2, 0.119, 0.03}) {
    CHECK(traj.at(t) == evolve_plaplace(u, t, problem));
  }
}

TEST_CASE("p-Laplacian invariants on random data") {
  Philox rng(37);
  const int n = 24;
  const auto problem = make_problem(n, random_weights(rng, n));
  const double h = 1.0 / n;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = 2.0 * rng.uniform() - 1.0 + 0.3;
      b[i] = 2.0 * rng.uniform() - 1.0;
    }
    const StateVector u = StateVector::grid(a, h);
    const StateVector v = StateVector::grid(b, h);
    const double t = 0.05 + 0.2 * rng.uniform();
    const StateVector tu = evolve_plaplace(u, t, problem);
    const StateVector tv = evolve_plaplace(v, t, problem);

    CHECK(std::abs(mean(tu) - mean(u)) <= 1e-10);
    for (double q : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
      CHECK(norm_lq(tu - tv, q) <= norm_lq(u - v, q) + 1e-9);
    }
    // energy at the minimizer never exceeds the energy at the previous state
    const StateVector w = implicit_euler_step(u, problem);
    CHECK(step_energy(w, u, problem, problem.config().dt) <=
          step_energy(u, u, problem, problem.config().dt));
  }
}

TEST_CASE("zero-mean states stay zero-mean along the flow") {
  Philox rng(41);
  const auto problem = make_problem(32, random_weights(rng, 32));
  StateVector u = random_zero_mean(rng, 32, 1.0, 1.0 / 32);
  for (int k = 0; k < 50; ++k) {
    u = implicit_euler_step(u, problem);
    CHECK(std::abs(mean(u)) <= 1e-10);
  }
}

TEST_CASE("project_zero_mean") {
  const StateVector c = StateVector::grid({3.0, 3.0, 3.0}, 1.0);
  CHECK(project_zero_mean(c).is_zero());
  const StateVector z = StateVector::grid({-1.0, 0.5, 0.5}, 1.0);
  const StateVector pz = project_zero_mean(z);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(pz[i] - z[i]) <= 1e-14);
  const StateVector p2 = project_zero_mean(StateVector::grid({1.0, 3.0}, 0.5));
  CHECK(p2[0] == -1.0);
  CHECK(p2[1] == 1.0);
}

TEST_CASE("fit_extinction_rate on exact lines") {
  DecayCurve line;
  for (int k = 0; k <= 10; ++k) {
    line.times.push_back(0.1 * k);
    line.norm_rho.push_back(std::max(0.0, 2.0 - 2.5 * 0.1 * k));
  }
  DecayCurve zero{{0.0}, {0.0}};
  const std::vector<DecayCurve> curves{line, zero};
  const KappaFit fit = fit_extinction_rate(curves, 0.5);
  CHECK(fit.kappa_emp == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(fit.fit_residual <= 1e-12);
  CHECK(fit.samples_used == 1);
  CHECK_THROWS_AS(fit_extinction_rate(std::vector<DecayCurve>{zero}, 0.5), ConfigError);
}

TEST_CASE("estimate_kappa: sine profile on 64 cells") {
  const Grid1D grid{64, 1.0};
  const PLaplaceProblem problem(grid, WeightField::constant(grid, 1.0), PLaplaceConfig{});
  std::vector<double> v(64);
  for (int i = 0; i < 64; ++i) v[i] = std::sin(2.0 * std::numbers::pi * (i + 0.5) / 64.0);
  const std::vector<StateVector> samples{project_zero_mean(StateVector::grid(v, grid.h())),
                                         StateVector::zeros_like(StateVector::grid(v, grid.h()))};
  const KappaFit fit = estimate_kappa(samples, problem, 50.0);
  MESSAGE("kappa_emp (sine, 64 cells) = " << fit.kappa_emp);
  CHECK(fit.kappa_emp > 0.0);
  CHECK(fit.fit_residual <= 1e-9);
  CHECK(fit.rho_used == doctest::Approx(0.5));
  CHECK(fit.samples_used == 1);

  CHECK_THROWS_AS(estimate_kappa(samples, problem, 0.05), NoExtinction);
  const std::vector<StateVector> biased{StateVector::grid(std::vector<double>(64, 1.0), grid.h())};
  CHECK_THROWS_AS(estimate_kappa(biased, problem, 10.0), ConfigError);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(Grid1D({1, 1.0}).validate(), ConfigError);
  PLaplaceConfig cfg;
  cfg.p = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  const Grid1D grid{4, 1.0};
  CHECK_THROWS_AS(PLaplaceProblem(grid, WeightField{{1.0, 0.0, 1.0}}, PLaplaceConfig{}), ConfigError);
  CHECK_THROWS_AS(PLaplaceProblem(grid, WeightField{{1.0}}, PLaplaceConfig{}), ConfigError);
}
