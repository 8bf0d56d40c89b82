#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "regen/errors.hpp"
#include "regen/jump_process.hpp"

using namespace regen;

namespace {

Semigroup unit_scalar() { return Semigroup::scalar_power_law({1.0, 0.5}); }

DriverConfig deterministic_driver() {
  return DriverConfig{BetaLaw(beta_law::Deterministic{3.0}), EtaLaw(eta_law::ScalarConstant{1.0}), 1};
}

DriverConfig stochastic_driver(std::uint64_t seed) {
  return DriverConfig{BetaLaw(beta_law::Exponential{1.0}), EtaLaw(eta_law::ScalarUniform{1.0}), seed};
}

}  // namespace

TEST_CASE("step_chain examples") {
  const Semigroup sg = unit_scalar();
  const ExtinctionPolicy policy;
  const StepResult a = step_chain(StateVector::scalar(0.0), 1.7, StateVector::scalar(1.0), sg, policy);
  CHECK(a.next.value() == 1.0);
  CHECK(a.extinct);
  const StepResult b = step_chain(StateVector::scalar(1.0), 0.25, StateVector::scalar(0.5), sg, policy);
  CHECK(b.next.value() == doctest::Approx(1.0625).epsilon(1e-15));
  CHECK_FALSE(b.extinct);
  const StepResult c = step_chain(StateVector::scalar(1.0), 2.0, StateVector::scalar(0.3), sg, policy);
  CHECK(c.next.value() == 0.3);
  CHECK(c.extinct);
  CHECK_THROWS_AS(step_chain(StateVector::scalar(1.0), 0.0, StateVector::scalar(0.3), sg, policy), ConfigError);
}

TEST_CASE("evaluate_path") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = deterministic_driver();
  ReplicateRng rng = derive_replicate_rng(1, 0);
  const Chain chain = build_chain(StateVector::scalar(1.0), drv, rng, sg, ExtinctionPolicy{}, 4);
  REQUIRE(chain.jump_times.size() == 5);
  CHECK(chain.jump_times[1] == 3.0);
  CHECK(evaluate_path(chain, sg, 0.5).value() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(evaluate_path(chain, sg, 3.0) == chain.states[1]);
  CHECK(evaluate_path(chain, sg, 6.0 + 1.0).value() == 0.0);
  CHECK_THROWS_AS(evaluate_path(chain, sg, 12.0), OutOfHorizon);
  CHECK_THROWS_AS(evaluate_path(chain, sg, 100.0), OutOfHorizon);
}

TEST_CASE("chain invariants on a stochastic scalar run") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = stochastic_driver(5);
  ReplicateRng rng = derive_replicate_rng(5, 0);
  const Chain chain = build_chain(StateVector::scalar(0.4), drv, rng, sg, ExtinctionPolicy{}, 2000);
  double acc = 0.0;
  for (std::size_t m = 1; m < chain.states.size(); ++m) {
    acc += chain.betas[m];
    CHECK(chain.jump_times[m] > chain.jump_times[m - 1]);
    CHECK(std::abs(chain.jump_times[m] - acc) <= 1e-12 * std::max(1.0, acc));
    // path just before the jump plus the jump reproduces the next state
    const double before = chain.jump_times[m] - 1e-12;
    if (before > chain.jump_times[m - 1]) {
      const StateVector left = evaluate_path(chain, sg, before);
      // the path itself moves by |d/dt T| * 1e-12 over the offset
      const double speed = 2.0 * std::sqrt(std::abs(left.value()));
      CHECK(std::abs(left.value() + chain.etas[m].value() - chain.states[m].value()) <=
            1e-12 + 2e-12 * speed);
    }
    if (chain.extinct[m]) CHECK(chain.states[m] == chain.etas[m]);
  }
}

TEST_CASE("trajectory CSV") {
  const Semigroup sg = unit_scalar();
  ReplicateRng rng = derive_replicate_rng(1, 0);
  const Chain chain = build_chain(StateVector::scalar(0.0), deterministic_driver(), rng, sg, ExtinctionPolicy{}, 2);
  std::ostringstream os;
  write_trajectory_csv(os, chain, sg);
  const std::string s = os.str();
  CHECK(s.rfind("m,alpha_m,norm_V1,norm_V2,extinct_flag\n", 0) == 0);
  CHECK(s.find("\n1,3,1,1,1\n") != std::string::npos);
  CHECK(s.find("\n2,6,1,1,1\n") != std::string::npos);
}

TEST_CASE("deterministic cycles") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = deterministic_driver();
  const std::vector<Functional> xis{Functional::identity(), Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(1, 0);
  std::vector<CycleRecord> cycles;
  const WarmUp warm = simulate_cycles(StateVector::scalar(0.0), setup, rng, 20,
                                      [&](const CycleRecord& c) { cycles.push_back(c); });
  CHECK(warm.m_end == 1);
  CHECK(warm.t_end == 3.0);
  CHECK(warm.integrals[0][0] == 0.0);
  REQUIRE(cycles.size() == 20);
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    const CycleRecord& c = cycles[i];
    CHECK(c.n == i + 1);
    CHECK(c.m_end == c.m_start + 1);
    CHECK(c.tau == 3.0);
    CHECK(std::abs(c.integrals[0][0] - 1.0 / 3.0) <= 1e-12);
    CHECK(std::abs(c.integrals[1][0] - 1.0 / 3.0) <= 1e-12);
  }
}

TEST_CASE("every step extincts when beta exceeds the largest extinction time") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv{BetaLaw(beta_law::Uniform{1.5, 2.5}), EtaLaw(eta_law::ScalarUniform{1.0}), 3};
  const std::vector<Functional> xis{Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(3, 0);
  std::uint64_t expect = 1;
  simulate_cycles(StateVector::scalar(0.7), setup, rng, 200, [&](const CycleRecord& c) {
    CHECK(c.m_start == expect);
    CHECK(c.m_end == expect + 1);
    ++expect;
  });
}

TEST_CASE("cycle structure on a stochastic run") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = stochastic_driver(8);
  const std::vector<Functional> xis{Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(8, 0);
  std::uint64_t prev_end = 0;
  double prev_t = 0.0;
  const WarmUp warm = simulate_cycles(StateVector::scalar(2.0), setup, rng, 5000, [&](const CycleRecord& c) {
    CHECK(c.m_end >= c.m_start + 1);
    CHECK(c.m_start >= c.n);
    if (prev_end != 0) {
      CHECK(c.m_start == prev_end);
      CHECK(c.t_start == prev_t);
    }
    CHECK(c.tau > 0.0);
    CHECK(std::abs(c.tau - (c.t_end - c.t_start)) <= 1e-9);
    CHECK(c.integrals[0][0] >= 0.0);
    prev_end = c.m_end;
    prev_t = c.t_end;
  });
  CHECK(warm.m_end >= 1);
}

TEST_CASE("cycle cap") {
  const Semigroup sg = unit_scalar();
  // beta tiny, jumps large: the chain never goes extinct
  const DriverConfig drv{BetaLaw(beta_law::Deterministic{1e-3}), EtaLaw(eta_law::ScalarConstant{1.0}), 0};
  const std::vector<Functional> xis{Functional::norm_v2()};
  ExtinctionPolicy policy;
  policy.m_cap = 100;
  SimulationSetup setup{&sg, &drv, policy, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(0, 0);
  CHECK_THROWS_AS(simulate_cycles(StateVector::scalar(1.0), setup, rng, 3, [](const CycleRecord&) {}),
                  CycleCapExceeded);
}

TEST_CASE("simulate_until_time: deterministic horizon") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = deterministic_driver();
  const std::vector<Functional> xis{Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(1, 0);
  const std::vector<double> cps{1.0, 3.5, 6.0};
  const HorizonResult r = simulate_until_time(StateVector::scalar(0.0), setup, rng, cps);
  CHECK(r.integrals[0][0][0] == 0.0);
  // after the first jump at 3, the state 1 decays; int_0^0.5 (1 - s)^2 ds
  CHECK(std::abs(r.integrals[1][0][0] - 0.875 / 3.0) <= 1e-14);
  CHECK(std::abs(r.integrals[2][0][0] - 1.0 / 3.0) <= 1e-14);
  CHECK(r.renewal_counts[0] == 0);
  CHECK(r.renewal_counts[1] == 1);
  CHECK(r.renewal_counts[2] == 2);
}

TEST_CASE("simulate_until_time: single-segment horizon and monotone integrals") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv{BetaLaw(beta_law::Deterministic{10.0}), EtaLaw(eta_law::ScalarUniform{1.0}), 4};
  const std::vector<Functional> xis{Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(4, 0);
  const std::vector<double> cps{0.5};
  const HorizonResult r = simulate_until_time(StateVector::scalar(2.0), setup, rng, cps);
  const double expect = integrate_segment(Functional::norm_v2(), StateVector::scalar(2.0), 0.5, sg, QuadConfig{}).value[0];
  CHECK(r.integrals[0][0][0] == doctest::Approx(expect).epsilon(1e-14));

  const DriverConfig sdrv = stochastic_driver(12);
  SimulationSetup s2{&sg, &sdrv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng2 = derive_replicate_rng(12, 0);
  std::vector<double> many;
  for (int k = 1; k <= 50; ++k) many.push_back(2.0 * k);
  const HorizonResult r2 = simulate_until_time(StateVector::scalar(0.0), s2, rng2, many);
  for (std::size_t c = 1; c < many.size(); ++c) {
    CHECK(r2.integrals[c][0][0] >= r2.integrals[c - 1][0][0]);
    CHECK(r2.renewal_counts[c] >= r2.renewal_counts[c - 1]);
  }
}

TEST_CASE("simulate_until_time: path integral equals warm-up plus cycles plus partial") {
  const Semigroup sg = unit_scalar();
  const DriverConfig drv = stochastic_driver(21);
  const std::vector<Functional> xis{Functional::norm_v2()};
  SimulationSetup setup{&sg, &drv, ExtinctionPolicy{}, QuadConfig{}, xis};
  ReplicateRng rng = derive_replicate_rng(21, 0);
  const std::vector<double> cps{200.0};
  HorizonOptions opt;
  opt.extinctions_after_horizon = 2;
  const HorizonResult r = simulate_until_time(StateVector::scalar(0.0), setup, rng, cps, opt);
  const std::uint64_t L = r.renewal_counts[0];
  REQUIRE(r.cycles.size() >= L + 1);
  REQUIRE(L >= 1);
  // cycle L (index L-1) straddles the horizon; cycles 1..L-1 lie before it
  CHECK(r.cycles[L - 1].t_start <= 200.0);
  CHECK(r.cycles[L - 1].t_end >= 200.0);
  double below = r.warm_up.integrals[0][0];
  for (std::uint64_t k = 0; k + 1 < L; ++k) below += r.cycles[k].integrals[0][0];
  CHECK(r.integrals[0][0][0] >= below - 1e-9);
  CHECK(r.integrals[0][0][0] <= below + r.cycles[L - 1].integrals[0][0] + 1e-9);
}
