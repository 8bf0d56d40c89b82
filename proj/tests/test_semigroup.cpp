#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "regen/errors.hpp"
#include "regen/rng.hpp"
#include "regen/semigroup.hpp"

using namespace regen;

namespace {

Semigroup scalar_sg(double kappa = 1.0, double rho = 0.5) {
  return Semigroup::scalar_power_law({kappa, rho});
}

}  // namespace

TEST_CASE("scalar power law closed form") {
  const Semigroup sg = scalar_sg();
  CHECK(sg.evolve(StateVector::scalar(1.0), 0.0).value() == 1.0);
  CHECK(sg.evolve(StateVector::scalar(1.0), 0.25).value() == doctest::Approx(0.5625).epsilon(1e-15));
  CHECK(sg.evolve(StateVector::scalar(1.0), 2.0).value() == 0.0);
  // sign is preserved
  CHECK(sg.evolve(StateVector::scalar(-1.0), 0.25).value() == doctest::Approx(-0.5625).epsilon(1e-15));
}

TEST_CASE("scalar extinction time") {
  CHECK(scalar_extinction_time({1.0, 0.5}, StateVector::scalar(1.0)) == 1.0);
  CHECK(scalar_extinction_time({2.0, 0.5}, StateVector::scalar(4.0)) == 1.0);
  CHECK(scalar_extinction_time({1.0, 0.5}, StateVector::scalar(0.0)) == 0.0);

  const ExtinctionParams prm{1.3, 0.4};
  const Semigroup sg = Semigroup::scalar_power_law(prm);
  for (double v : {0.3, -2.0, 7.5}) {
    const double te = scalar_extinction_time(prm, StateVector::scalar(v));
    CHECK(sg.evolve(StateVector::scalar(v), te).value() == 0.0);
    CHECK(sg.evolve(StateVector::scalar(v), te * 1.5).value() == 0.0);
  }
}

TEST_CASE("extinction params validation") {
  CHECK_THROWS_AS(Semigroup::scalar_power_law({0.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(Semigroup::scalar_power_law({1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(Semigroup::scalar_power_law({1.0, 0.0}), ConfigError);
}

TEST_CASE("scalar semigroup rejects grid states") {
  const Semigroup sg = scalar_sg();
  CHECK_THROWS_AS(sg.evolve(StateVector::grid({1.0, 2.0}, 0.5), 1.0), ConfigError);
}

TEST_CASE("scalar axioms hold to machine precision on random samples") {
  Philox rng(7);
  const ExtinctionParams prm{0.8, 0.35};
  const Semigroup sg = Semigroup::scalar_power_law(prm);
  std::vector<AxiomSample> samples;
  for (int i = 0; i < 2000; ++i) {
    AxiomSample s;
    s.v = StateVector::scalar(6.0 * rng.uniform() - 3.0);
    s.u = StateVector::scalar(6.0 * rng.uniform() - 3.0);
    s.t = 3.0 * rng.uniform();
    s.s = 3.0 * rng.uniform();
    samples.push_back(s);
  }
  const AxiomReport rep = check_semigroup_axioms(sg, samples);
  CHECK(rep.max_semigroup <= 1e-12);
  CHECK(rep.max_contraction <= 1e-12);
  CHECK(rep.max_identity == 0.0);
}

TEST_CASE("scalar extinction bound holds with equality") {
  Philox rng(11);
  const ExtinctionParams prm{1.0, 0.5};
  const Semigroup sg = Semigroup::scalar_power_law(prm);
  for (int i = 0; i < 1000; ++i) {
    const double v = 4.0 * rng.uniform() - 2.0;
    const double t = 2.0 * rng.uniform();
    const double lhs = std::pow(std::abs(sg.evolve(StateVector::scalar(v), t).value()), prm.rho);
    const double rhs = std::max(0.0, std::pow(std::abs(v), prm.rho) - prm.kappa * t);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("check_semigroup_axioms needs samples") {
  const Semigroup sg = scalar_sg();
  CHECK_THROWS_AS(check_semigroup_axioms(sg, {}), ConfigError);
}

TEST_CASE("plaplace axioms at step multiples") {
  const Grid1D grid{16, 1.0};
  auto problem = std::make_shared<PLaplaceProblem>(grid, WeightField::constant(grid, 1.0),
                                                   PLaplaceConfig{});
  const Semigroup sg = Semigroup::plaplace(problem);
  std::vector<double> vals(16);
  for (int i = 0; i < 16; ++i) vals[i] = std::cos(3.14159 * (i + 0.5) / 16.0) * 0.3;
  const StateVector v = StateVector::grid(vals, grid.h());

  std::vector<AxiomSample> samples;
  samples.push_back({v, std::nullopt, 0.03, 0.05});
  samples.push_back({v, v, 0.1, 0.02});
  const AxiomReport rep = check_semigroup_axioms(sg, samples);
  CHECK(rep.residuals[0].semigroup == 0.0);
  CHECK(rep.residuals[1].semigroup == 0.0);
  CHECK(rep.residuals[1].contraction == 0.0);
  CHECK(rep.max_identity == 0.0);
  // against the zero state: contraction means the norm does not grow
  CHECK(rep.residuals[0].contraction <= 1e-12);
}
