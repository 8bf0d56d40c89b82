#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "regen/driver.hpp"
#include "regen/errors.hpp"
#include "regen/estimators.hpp"
#include "regen/rng.hpp"

using namespace regen;

TEST_CASE("Philox4x32-10 known answer") {
  // Random123 reference vector: counter 0, key 0.
  Philox rng(0);
  CHECK(rng.next_u32() == 0x6627e8d5u);
  CHECK(rng.next_u32() == 0xe169c58du);
  CHECK(rng.next_u32() == 0xbc57ac4cu);
  CHECK(rng.next_u32() == 0x9b00dbd8u);
  CHECK(rng.next_u32() != 0x6627e8d5u);
}

TEST_CASE("replicate streams are deterministic and separated") {
  ReplicateRng a = derive_replicate_rng(42, 0);
  ReplicateRng b = derive_replicate_rng(42, 0);
  ReplicateRng c = derive_replicate_rng(42, 1);
  for (int i = 0; i < 100; ++i) {
    const double x = a.beta.uniform();
    CHECK(x == b.beta.uniform());
    if (i == 0) CHECK(x != c.beta.uniform());
  }
  ReplicateRng d = derive_replicate_rng(42, 0);
  CHECK(d.beta.next_u64() != d.eta.next_u64());
  CHECK(derive_replicate_rng(43, 0).beta.next_u64() != derive_replicate_rng(42, 0).beta.next_u64());
}

TEST_CASE("first draws across replicate indices are uniform") {
  std::vector<double> first;
  for (std::uint64_t k = 0; k < 10000; ++k) first.push_back(derive_replicate_rng(42, k).beta.uniform());
  const TestReport rep = ks_one_sample(first, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(rep.p_value > 0.01);
}

TEST_CASE("uniform range") {
  Philox rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = rng.uniform_pos();
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("beta laws") {
  Philox rng(2);
  CHECK(sample_beta(BetaLaw(beta_law::Deterministic{3.0}), rng) == 3.0);
  CHECK(sample_beta(BetaLaw(beta_law::Uniform{1.0, 1.0}), rng) == 1.0);

  const BetaLaw exp2(beta_law::Exponential{2.0});
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double b = sample_beta(exp2, rng);
    REQUIRE(b > 0.0);
    sum += b;
  }
  CHECK(std::abs(sum / n - 0.5) <= 0.002);
  CHECK(exp2.mean() == 0.5);

  const BetaLaw gam(beta_law::Gamma{2.5, 0.4});
  double gs = 0.0;
  for (int i = 0; i < 200000; ++i) gs += sample_beta(gam, rng);
  CHECK(std::abs(gs / 200000 - 1.0) <= 0.01);
  // Gamma moment: scale^k Gamma(shape + k) / Gamma(shape)
  CHECK(gam.moment(2.0) == doctest::Approx(0.16 * 2.5 * 3.5).epsilon(1e-12));
  CHECK(BetaLaw(beta_law::Uniform{1.0, 3.0}).moment(3.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(BetaLaw(beta_law::Exponential{1.0}).moment(12.0) == doctest::Approx(479001600.0).epsilon(1e-9));

  CHECK_THROWS_AS(BetaLaw(beta_law::Deterministic{0.0}), ConfigError);
  CHECK_THROWS_AS(BetaLaw(beta_law::Uniform{2.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(BetaLaw(beta_law::Exponential{-1.0}), ConfigError);
  CHECK_THROWS_AS(BetaLaw(beta_law::Gamma{0.0, 1.0}), ConfigError);
}

TEST_CASE("eta laws") {
  Philox rng(3);
  const StateVector scalar_shape = StateVector::scalar(0.0);
  CHECK(sample_eta(EtaLaw(eta_law::ScalarUniform{0.0}), rng, scalar_shape).value() == 0.0);
  CHECK(sample_eta(EtaLaw(eta_law::ScalarConstant{1.0}), rng, scalar_shape).value() == 1.0);

  const EtaLaw uni(eta_law::ScalarUniform{1.0});
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) acc += std::sqrt(std::abs(sample_eta(uni, rng, scalar_shape).value()));
  CHECK(std::abs(acc / n - 2.0 / 3.0) <= 0.005);
  CHECK(*uni.abs_moment(0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  const StateVector grid_shape = StateVector::grid(std::vector<double>(64, 0.0), 1.0 / 64);
  const EtaLaw bumps(eta_law::GridBumps{3, 0.5, 0.05, 0.15});
  for (int i = 0; i < 200; ++i) {
    const StateVector e = sample_eta(bumps, rng, grid_shape);
    CHECK(std::abs(mean(e)) <= 1e-14);
    CHECK(norm_inf(e) <= bumps.sup_bound());
  }
  CHECK_THROWS_AS(sample_eta(bumps, rng, scalar_shape), ConfigError);
  CHECK_THROWS_AS(sample_eta(uni, rng, grid_shape), ConfigError);
}

TEST_CASE("drift condition") {
  const NormAssignment norms;
  const StateVector shape = StateVector::scalar(0.0);

  DriverConfig ok_cfg{BetaLaw(beta_law::Deterministic{3.0}), EtaLaw(eta_law::ScalarConstant{1.0}), 0};
  const DriftEstimate a = check_drift_condition(ok_cfg, 1.0, 0.5, norms, shape, 10000);
  CHECK(a.exact);
  CHECK(a.lhs_estimate == -2.0);
  CHECK(a.ci_halfwidth == 0.0);
  CHECK(a.ok);

  DriverConfig bad_cfg{BetaLaw(beta_law::Deterministic{0.5}), EtaLaw(eta_law::ScalarConstant{1.0}), 0};
  const DriftEstimate b = check_drift_condition(bad_cfg, 1.0, 0.5, norms, shape, 10000);
  CHECK(b.lhs_estimate == 0.5);
  CHECK_FALSE(b.ok);

  DriverConfig mc_cfg{BetaLaw(beta_law::Exponential{1.0}), EtaLaw(eta_law::ScalarUniform{1.0}), 7};
  const DriftEstimate c = check_drift_condition(mc_cfg, 1.0, 0.5, norms, shape, 200000);
  CHECK_FALSE(c.exact);
  CHECK(c.ci_halfwidth > 0.0);
  CHECK(std::abs(c.lhs_estimate + 1.0 / 3.0) <= c.ci_halfwidth);
  CHECK(c.ok);

  CHECK_THROWS_AS(check_drift_condition(mc_cfg, 1.0, 0.5, norms, shape, 100), ConfigError);
}

TEST_CASE("changing the jump law leaves the beta sequence untouched") {
  ReplicateRng r1 = derive_replicate_rng(9, 4);
  ReplicateRng r2 = derive_replicate_rng(9, 4);
  const BetaLaw law(beta_law::Exponential{1.0});
  const StateVector shape = StateVector::scalar(0.0);
  for (int i = 0; i < 50; ++i) {
    sample_eta(EtaLaw(eta_law::ScalarUniform{1.0}), r1.eta, shape);
    sample_eta(EtaLaw(eta_law::ScalarConstant{2.0}), r2.eta, shape);
    CHECK(sample_beta(law, r1.beta) == sample_beta(law, r2.beta));
  }
}

TEST_CASE("moment sanity") {
  const NormAssignment norms;
  DriverConfig cfg{BetaLaw(beta_law::Exponential{1.0}), EtaLaw(eta_law::ScalarUniform{1.0}), 11};
  const auto checks = check_moments(cfg, norms, StateVector::scalar(0.0), 100000);
  REQUIRE(checks.size() == 2);
  for (const auto& m : checks) {
    CHECK(m.finite);
    CHECK(m.analytic.has_value());
    CHECK(m.ok);
  }

  DriverConfig grid_cfg{BetaLaw(beta_law::Uniform{0.5, 1.5}), EtaLaw(eta_law::GridBumps{2, 0.3, 0.05, 0.1}), 11};
  const auto grid_checks =
      check_moments(grid_cfg, norms, StateVector::grid(std::vector<double>(32, 0.0), 1.0 / 32), 100000);
  REQUIRE(grid_checks.size() == 2);
  for (const auto& m : grid_checks) CHECK(m.finite);
}
