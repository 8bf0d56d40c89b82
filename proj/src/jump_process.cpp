#include "regen/jump_process.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "regen/errors.hpp"

namespace regen {

void ExtinctionPolicy::validate() const {
  if (!(eps_ext > 0.0)) throw ConfigError("policy eps_ext must be > 0");
  if (m_cap < 1) throw ConfigError("policy m_cap must be >= 1");
}

StepResult step_chain(const StateVector& prev, double beta, const StateVector& eta,
                      const Semigroup& sg, const ExtinctionPolicy& policy) {
  if (!(beta > 0.0)) throw ConfigError("step_chain needs beta > 0");
  StateVector pre = sg.evolve(prev, beta);
  StepResult out;
  out.extinct = sg.norm_v(pre) <= policy.eps_ext;
  if (out.extinct) {
    out.next = eta;
  } else {
    out.next = std::move(pre);
    out.next += eta;
  }
  return out;
}

Chain build_chain(const StateVector& x0, const DriverConfig& driver, ReplicateRng& rng,
                  const Semigroup& sg, const ExtinctionPolicy& policy, std::size_t n_steps) {
  sg.check_state(x0);
  Chain chain;
  chain.states.push_back(x0);
  chain.jump_times.push_back(0.0);
  chain.betas.push_back(0.0);
  chain.etas.push_back(StateVector::zeros_like(x0));
  chain.extinct.push_back(false);
  for (std::size_t m = 1; m <= n_steps; ++m) {
    const double beta = sample_beta(driver.beta, rng.beta);
    StateVector eta = sample_eta(driver.eta, rng.eta, x0);
    StepResult step = step_chain(chain.states.back(), beta, eta, sg, policy);
    chain.states.push_back(std::move(step.next));
    chain.jump_times.push_back(chain.jump_times.back() + beta);
    chain.betas.push_back(beta);
    chain.etas.push_back(std::move(eta));
    chain.extinct.push_back(step.extinct);
  }
  return chain;
}

StateVector evaluate_path(const Chain& chain, const Semigroup& sg, double t) {
  if (!(t >= 0.0) || chain.jump_times.size() < 2 || !(t < chain.jump_times.back())) {
    std::ostringstream msg;
    msg << "path evaluation at t = " << t << " is outside the simulated range [0, "
        << (chain.jump_times.empty() ? 0.0 : chain.jump_times.back()) << ")";
    throw OutOfHorizon(msg.str());
  }
  const auto it = std::upper_bound(chain.jump_times.begin(), chain.jump_times.end(), t);
  const auto m = static_cast<std::size_t>(it - chain.jump_times.begin()) - 1;
  return sg.evolve(chain.states[m], t - chain.jump_times[m]);
}

void write_trajectory_csv(std::ostream& os, const Chain& chain, const Semigroup& sg) {
  os << "m,alpha_m,norm_V1,norm_V2,extinct_flag\n";
  char buf[160];
  for (std::size_t m = 0; m < chain.states.size(); ++m) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d\n", m, chain.jump_times[m],
                  sg.norm_v1(chain.states[m]), sg.norm_v2(chain.states[m]),
                  chain.extinct[m] ? 1 : 0);
    os << buf;
  }
}

namespace {

std::vector<WValue> zero_integrals(std::span<const Functional> xis, const StateVector& shape) {
  std::vector<WValue> out;
  out.reserve(xis.size());
  for (const auto& xi : xis) out.emplace_back(xi.dim(shape), 0.0);
  return out;
}

void accumulate(std::vector<WValue>& acc, const std::vector<SegmentIntegralResult>& segs) {
  for (std::size_t f = 0; f < acc.size(); ++f) {
    for (std::size_t i = 0; i < acc[f].size(); ++i) acc[f][i] += segs[f].value[i];
  }
}

// Walks the chain one step at a time and tracks the cycle bookkeeping; the
// two simulation entry points differ only in what they do per step.
class ChainWalker {
 public:
  ChainWalker(const StateVector& x0, const SimulationSetup& setup, ReplicateRng& rng)
      : setup_(setup), rng_(rng), state_(x0) {
    if (!setup.sg || !setup.driver) throw ConfigError("simulation setup is incomplete");
    setup.sg->check_state(x0);
    setup.policy.validate();
    warm_.integrals = zero_integrals(setup.functionals, x0);
    current_.integrals = warm_.integrals;
  }

  struct Step {
    double alpha_prev;
    double beta;
    bool extinct;
    bool closed_cycle;
  };

  // `on_segment(flow, alpha_prev, beta)` sees the flow of the state held
  // over [alpha_prev, alpha_prev + beta) before the state advances.
  template <class OnSegment>
  Step advance(OnSegment&& on_segment) {
    const Semigroup& sg = *setup_.sg;
    ++m_;
    ++steps_in_cycle_;
    if (steps_in_cycle_ > setup_.policy.m_cap) {
      std::ostringstream msg;
      msg << "cycle " << current_.n << " exceeded " << setup_.policy.m_cap
          << " chain steps (drift condition failing or eps_ext too small)";
      throw CycleCapExceeded(msg.str());
    }
    const double beta = sample_beta(setup_.driver->beta, rng_.beta);
    StateVector eta = sample_eta(setup_.driver->eta, rng_.eta, state_);

    Flow flow = sg.flow(state_);
    const auto segs = integrate_segment(setup_.functionals, flow, beta, sg, setup_.quad);
    on_segment(flow, alpha_, beta);
    StateVector pre = flow.at(beta);

    Step step{alpha_, beta, sg.norm_v(pre) <= setup_.policy.eps_ext, false};
    if (step.extinct) {
      state_ = std::move(eta);
    } else {
      state_ = std::move(pre);
      state_ += eta;
    }
    alpha_ += beta;

    if (in_warm_up_) {
      accumulate(warm_.integrals, segs);
      if (step.extinct) {
        in_warm_up_ = false;
        warm_.m_end = m_;
        warm_.t_end = alpha_;
        open_cycle();
      }
    } else {
      accumulate(current_.integrals, segs);
      current_.tau += beta;
      if (step.extinct) {
        current_.m_end = m_;
        current_.t_end = alpha_;
        step.closed_cycle = true;
      }
    }
    last_segs_ = segs;
    return step;
  }

  const CycleRecord& current() const { return current_; }
  const WarmUp& warm_up() const { return warm_; }
  const std::vector<SegmentIntegralResult>& last_segments() const { return last_segs_; }
  std::uint64_t steps() const { return m_; }

  void open_cycle() {
    current_.n = ++cycles_opened_;
    current_.m_start = m_;
    current_.m_end = 0;
    current_.t_start = alpha_;
    current_.t_end = 0.0;
    current_.tau = 0.0;
    for (auto& w : current_.integrals) std::fill(w.begin(), w.end(), 0.0);
    steps_in_cycle_ = 0;
  }

 private:
  const SimulationSetup& setup_;
  ReplicateRng& rng_;
  StateVector state_;
  double alpha_ = 0.0;
  std::uint64_t m_ = 0;
  std::uint64_t steps_in_cycle_ = 0;
  std::uint64_t cycles_opened_ = 0;
  bool in_warm_up_ = true;
  WarmUp warm_;
  CycleRecord current_;
  std::vector<SegmentIntegralResult> last_segs_;
};

}  // namespace

WarmUp simulate_cycles(const StateVector& x0, const SimulationSetup& setup, ReplicateRng& rng,
                       std::uint64_t n_cycles, const CycleSink& sink) {
  ChainWalker walker(x0, setup, rng);
  std::uint64_t emitted = 0;
  while (emitted < n_cycles) {
    const auto step = walker.advance([](Flow&, double, double) {});
    if (step.closed_cycle) {
      sink(walker.current());
      ++emitted;
      walker.open_cycle();
    }
  }
  return walker.warm_up();
}

HorizonResult simulate_until_time(const StateVector& x0, const SimulationSetup& setup,
                                  ReplicateRng& rng, std::span<const double> checkpoints,
                                  const HorizonOptions& options) {
  if (checkpoints.empty()) throw ConfigError("simulate_until_time needs at least one checkpoint");
  if (!(checkpoints.front() > 0.0)) throw ConfigError("checkpoints must be > 0");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw ConfigError("checkpoints must be increasing");
  }
  const Semigroup& sg = *setup.sg;
  HorizonResult out;
  out.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  const double horizon = checkpoints.back();

  ChainWalker walker(x0, setup, rng);
  std::vector<WValue> running = zero_integrals(setup.functionals, x0);
  std::uint64_t extinctions = 0;
  int extinctions_after = 0;
  std::size_t next_cp = 0;

  while (next_cp < checkpoints.size() || extinctions_after < options.extinctions_after_horizon) {
    const auto step = walker.advance([&](Flow& flow, double alpha_prev, double beta) {
      const double seg_end = alpha_prev + beta;
      // Checkpoints inside [alpha_prev, seg_end) need a partial segment.
      while (next_cp < checkpoints.size() && checkpoints[next_cp] < seg_end) {
        const double partial = checkpoints[next_cp] - alpha_prev;
        std::vector<WValue> at_cp = running;
        if (partial > 0.0) {
          accumulate(at_cp, integrate_segment(setup.functionals, flow, partial, sg, setup.quad));
        }
        out.integrals.push_back(std::move(at_cp));
        out.renewal_counts.push_back(extinctions);
        ++next_cp;
      }
    });
    const double seg_end = step.alpha_prev + step.beta;
    accumulate(running, walker.last_segments());
    if (step.extinct) {
      ++extinctions;
      if (seg_end > horizon) ++extinctions_after;
    }
    if (step.closed_cycle) {
      if (options.keep_cycles) out.cycles.push_back(walker.current());
      walker.open_cycle();
    }
  }
  out.warm_up = walker.warm_up();
  out.chain_steps = walker.steps();
  return out;
}

}  // namespace regen
