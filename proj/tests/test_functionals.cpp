#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "regen/errors.hpp"
#include "regen/functionals.hpp"
#include "regen/plaplace.hpp"
#include "regen/rng.hpp"

using namespace regen;

namespace {

Semigroup unit_scalar() { return Semigroup::scalar_power_law({1.0, 0.5}); }

std::shared_ptr<PLaplaceProblem> small_problem(int n) {
  const Grid1D grid{n, 1.0};
  return std::make_shared<PLaplaceProblem>(grid, WeightField::constant(grid, 1.0), PLaplaceConfig{});
}

}  // namespace

TEST_CASE("apply: built-in functionals") {
  const NormAssignment norms;
  CHECK(apply(Functional::norm_v2(), StateVector::scalar(0.0), norms)[0] == 0.0);
  CHECK(apply(Functional::norm_v2(), StateVector::scalar(-2.5), norms)[0] == 2.5);
  const StateVector g = StateVector::grid({1.0, -2.0, 3.0, 0.5}, 0.25);
  const WValue id = apply(Functional::identity(), g, norms);
  REQUIRE(id.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(id[i] == g[i]);
  CHECK(apply(Functional::mass(g), g, norms)[0] == doctest::Approx(mass(g)).epsilon(1e-15));
  CHECK(apply(Functional::shifted(Functional::norm_v2(), 0.5), StateVector::scalar(-1.0), norms)[0] == 1.5);
  CHECK(apply(Functional::constant(2.0, g), g, norms)[0] == 2.0);
  CHECK_THROWS_AS(Functional::shifted(Functional::identity(), 1.0), ConfigError);
}

TEST_CASE("closed-form antiderivative") {
  CHECK(power_law_integral(1.0, 1.0, 0.5, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // past the extinction time the integrand is zero
  CHECK(power_law_integral(1.0, 1.0, 0.5, 3.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(power_law_integral(0.0, 1.0, 0.5, 3.0) == 0.0);
  // int_0^0.5 (1 - s)^2 ds = (1 - 0.125) / 3
  CHECK(power_law_integral(1.0, 1.0, 0.5, 0.5) == doctest::Approx(0.875 / 3.0).epsilon(1e-14));
}

TEST_CASE("segment integral: 1/3 by closed form and by Simpson") {
  const Semigroup sg = unit_scalar();
  const StateVector one = StateVector::scalar(1.0);
  const auto cf = integrate_segment(Functional::norm_v2(), one, 1.0, sg, QuadConfig{});
  CHECK(std::abs(cf.value[0] - 1.0 / 3.0) <= 1e-15);
  QuadConfig num;
  num.tol = 1e-10;
  num.force_numeric = true;
  const auto sq = integrate_segment(Functional::norm_v2(), one, 1.0, sg, num);
  CHECK(std::abs(sq.value[0] - 1.0 / 3.0) <= 1e-10);
  CHECK(sq.abs_error_estimate <= 1e-10);
  CHECK(sq.n_evals > 0);

  const auto zero = integrate_segment(Functional::norm_v2(), StateVector::scalar(0.0), 2.0, sg, QuadConfig{});
  CHECK(zero.value[0] == 0.0);
  const auto shifted =
      integrate_segment(Functional::shifted(Functional::norm_v2(), 0.75), StateVector::scalar(0.0), 2.0, sg, QuadConfig{});
  CHECK(shifted.value[0] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("closed form and quadrature agree on random segments") {
  Philox rng(101);
  const ExtinctionParams prm{0.7, 0.4};
  const Semigroup sg = Semigroup::scalar_power_law(prm);
  QuadConfig num;
  num.tol = 1e-10;
  num.force_numeric = true;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const StateVector s = StateVector::scalar(4.0 * rng.uniform() - 2.0);
    const double delta = 0.01 + 3.0 * rng.uniform();
    for (const Functional& xi : {Functional::norm_v2(), Functional::identity(), Functional::linear({-1.3})}) {
      const double a = integrate_segment(xi, s, delta, sg, QuadConfig{}).value[0];
      const double b = integrate_segment(xi, s, delta, sg, num).value[0];
      worst = std::max(worst, std::abs(a - b));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("shift identity and sub-linearity bound") {
  Philox rng(103);
  const NormAssignment norms;
  const Semigroup sg = unit_scalar();
  const QuadConfig quad;
  for (int i = 0; i < 200; ++i) {
    const StateVector s = StateVector::scalar(6.0 * rng.uniform() - 3.0);
    const double delta = 0.1 + 4.0 * rng.uniform();
    const double w = 2.0 * rng.uniform() - 1.0;
    const double base = integrate_segment(Functional::norm_v2(), s, delta, sg, quad).value[0];
    const double sh = integrate_segment(Functional::shifted(Functional::norm_v2(), w), s, delta, sg, quad).value[0];
    CHECK(std::abs(sh - (base + delta * w)) <= 1e-12);

    for (const Functional& xi : {Functional::norm_v2(), Functional::identity(), Functional::linear({0.8}),
                                 Functional::shifted(Functional::norm_v2(), w)}) {
      const double v = integrate_segment(xi, s, delta, sg, quad).value[0];
      const double bound = delta * (xi.c1(s, norms) * std::abs(s.value()) + xi.c2());
      CHECK(std::abs(v) <= bound + quad.tol);
    }
  }
}

TEST_CASE("mass functional along the p-Laplacian flow") {
  auto problem = small_problem(32);
  const Semigroup sg = Semigroup::plaplace(problem);
  std::vector<double> v(32);
  for (int i = 0; i < 32; ++i) v[i] = 0.2 + std::cos(std::numbers::pi * (i + 0.5) / 32.0);
  const StateVector s = StateVector::grid(v, 1.0 / 32);
  const double delta = 0.137;
  const auto res = integrate_segment(Functional::mass(s), s, delta, sg, QuadConfig{});
  CHECK(std::abs(res.value[0] - mean(s) * 1.0 * delta) <= 1e-12);
}

TEST_CASE("grid identity integral matches the linear functionals on a shared subdivision") {
  auto problem = small_problem(16);
  const Semigroup sg = Semigroup::plaplace(problem);
  const NormAssignment& norms = sg.norms();
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = 0.4 * std::sin(2.0 * std::numbers::pi * (i + 0.5) / 16.0);
  const StateVector s = project_zero_mean(StateVector::grid(v, 1.0 / 16));
  std::vector<double> psi(16);
  for (int i = 0; i < 16; ++i) psi[i] = (i % 3) - 1.0;
  const std::vector<Functional> xis{Functional::identity(), Functional::linear(psi), Functional::norm_v2()};
  Flow flow = sg.flow(s);
  const auto out = integrate_segment(xis, flow, 0.2, sg, QuadConfig{});
  double proj = 0.0;
  for (int i = 0; i < 16; ++i) proj += out[0].value[i] * psi[i];
  CHECK(std::abs(proj - out[1].value[0]) <= 1e-13);
  // NormV2 integral bounded by delta times the initial norm (V2 contraction)
  CHECK(out[2].value[0] <= 0.2 * norm_lq(s, norms.q_v2) + 1e-9);
}

TEST_CASE("integrate_cycle sums its segments") {
  const Semigroup sg = unit_scalar();
  const std::vector<SegmentSpec> cycle{{StateVector::scalar(1.0), 3.0}};
  CHECK(integrate_cycle(Functional::norm_v2(), cycle, sg, QuadConfig{})[0] ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const double nu = 1.0 / 9.0;
  CHECK(integrate_cycle(Functional::shifted(Functional::norm_v2(), -nu), cycle, sg, QuadConfig{})[0] ==
        doctest::Approx(1.0 / 3.0 - 3.0 * nu).epsilon(1e-14));
  const std::vector<SegmentSpec> empty_state{{StateVector::scalar(0.0), 2.0}};
  CHECK(integrate_cycle(Functional::norm_v2(), empty_state, sg, QuadConfig{})[0] == 0.0);
  const std::vector<SegmentSpec> two{{StateVector::scalar(1.0), 0.5}, {StateVector::scalar(2.0), 1.0}};
  const double expect = power_law_integral(1.0, 1.0, 0.5, 0.5) + power_law_integral(std::sqrt(2.0), 1.0, 0.5, 1.0);
  CHECK(integrate_cycle(Functional::norm_v2(), two, sg, QuadConfig{})[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adaptive Simpson: exactness, budget") {
  const auto cubic = adaptive_simpson([](double x) { return WValue{x * x * x}; }, 0.0, 2.0, 1e-12, 1000);
  CHECK(cubic.value[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(adaptive_simpson([](double x) { return WValue{std::sqrt(std::abs(x - 0.3))}; }, 0.0, 1.0,
                                   1e-15, 50),
                  QuadratureBudgetExceeded);
}
