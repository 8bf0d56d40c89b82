#include "regen/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "regen/errors.hpp"

namespace regen {

Functional Functional::identity() {
  Functional f;
  f.kind_ = Kind::IdentityV2;
  return f;
}

Functional Functional::norm_v2() {
  Functional f;
  f.kind_ = Kind::NormV2;
  return f;
}

Functional Functional::linear(std::vector<double> psi) {
  if (psi.empty()) throw ConfigError("linear functional needs a weight vector");
  Functional f;
  f.kind_ = Kind::Linear;
  f.psi_ = std::move(psi);
  return f;
}

Functional Functional::mass(const StateVector& shape) {
  return linear(std::vector<double>(shape.size(), shape.h()));
}

Functional Functional::shifted(Functional base, double w) {
  if (!base.scalar_valued()) throw ConfigError("only scalar-valued functionals can be shifted");
  if (!std::isfinite(w)) throw ConfigError("shift must be finite");
  base.shift_ += w;
  return base;
}

Functional Functional::constant(double w, const StateVector& shape) {
  return shifted(linear(std::vector<double>(shape.size(), 0.0)), w);
}

std::size_t Functional::dim(const StateVector& shape) const {
  return kind_ == Kind::IdentityV2 ? shape.size() : 1;
}

double Functional::c1(const StateVector& shape, const NormAssignment& norms) const {
  switch (kind_) {
    case Kind::IdentityV2:
    case Kind::NormV2:
      return 1.0;
    case Kind::Linear: {
      if (shape.is_scalar()) return std::abs(psi_.front());
      // Hoelder: |sum v_i psi_i| <= ||v||_{q,h} ||psi / h||_{q',h}
      const double q = norms.q_v2;
      const double h = shape.h();
      std::vector<double> scaled(psi_.size());
      for (std::size_t i = 0; i < psi_.size(); ++i) scaled[i] = psi_[i] / h;
      const StateVector dual = StateVector::grid(std::move(scaled), h);
      if (q == 1.0) return norm_inf(dual);
      if (std::isinf(q)) return norm_l1(dual);
      return norm_lq(dual, q / (q - 1.0));
    }
  }
  return 0.0;
}

std::string Functional::name() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::IdentityV2: os << "identity"; break;
    case Kind::NormV2: os << "norm_v2"; break;
    case Kind::Linear: {
      const bool zero = std::all_of(psi_.begin(), psi_.end(), [](double x) { return x == 0.0; });
      if (zero && shift_ != 0.0) {
        os << "const(" << shift_ << ")";
        return os.str();
      }
      os << "linear";
      break;
    }
  }
  if (shift_ != 0.0) os << (shift_ > 0 ? "+" : "") << shift_;
  return os.str();
}

WValue apply(const Functional& xi, const StateVector& v, const NormAssignment& norms) {
  switch (xi.kind()) {
    case Functional::Kind::IdentityV2:
      return WValue(v.values().begin(), v.values().end());
    case Functional::Kind::NormV2:
      return {norms.v2(v) + xi.shift()};
    case Functional::Kind::Linear: {
      const auto psi = xi.psi();
      if (psi.size() != v.size()) throw ConfigError("linear functional dimension mismatch");
      double acc = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i) acc += psi[i] * v[i];
      return {acc + xi.shift()};
    }
  }
  return {};
}

double w_norm(const Functional& xi, const WValue& w, const StateVector& shape,
              const NormAssignment& norms) {
  if (xi.scalar_valued()) return std::abs(w.front());
  if (shape.is_scalar()) return std::abs(w.front());
  return norms.v2(StateVector::grid(w, shape.h()));
}

namespace {

void axpy(WValue& y, double a, const WValue& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

struct SimpsonState {
  const std::function<WValue(double)>* f;
  std::size_t evals = 0;
  std::size_t max_evals = 0;

  WValue eval(double x) {
    if (++evals > max_evals) {
      throw QuadratureBudgetExceeded("adaptive Simpson exceeded its evaluation budget");
    }
    return (*f)(x);
  }
};

// Returns the refined panel value and accumulates the error estimate.
WValue simpson_panel(SimpsonState& st, double a, double b, const WValue& fa, const WValue& fm,
                     const WValue& fb, const WValue& whole, double tol, int depth, double& err) {
  const double m = 0.5 * (a + b);
  const WValue flm = st.eval(0.5 * (a + m));
  const WValue frm = st.eval(0.5 * (m + b));
  const double hl = (m - a) / 6.0;
  const double hr = (b - m) / 6.0;
  WValue left(fa.size()), right(fa.size());
  double diff = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    left[i] = hl * (fa[i] + 4.0 * flm[i] + fm[i]);
    right[i] = hr * (fm[i] + 4.0 * frm[i] + fb[i]);
    diff = std::max(diff, std::abs(left[i] + right[i] - whole[i]));
  }
  if (diff <= 15.0 * tol || depth >= 50 || b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a))) {
    WValue out(fa.size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
      const double d = left[i] + right[i] - whole[i];
      out[i] = left[i] + right[i] + d / 15.0;
    }
    err += diff / 15.0;
    return out;
  }
  WValue l = simpson_panel(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, err);
  const WValue r = simpson_panel(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, err);
  axpy(l, 1.0, r);
  return l;
}

WValue stacked_apply(std::span<const Functional> xis, const StateVector& v,
                     const NormAssignment& norms) {
  WValue out;
  for (const auto& xi : xis) {
    const WValue w = apply(xi, v, norms);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::vector<SegmentIntegralResult> unstack(std::span<const Functional> xis, const WValue& total,
                                           const StateVector& shape, double err,
                                           std::size_t evals) {
  std::vector<SegmentIntegralResult> out;
  out.reserve(xis.size());
  std::size_t offset = 0;
  for (const auto& xi : xis) {
    const std::size_t d = xi.dim(shape);
    SegmentIntegralResult r;
    r.value.assign(total.begin() + static_cast<std::ptrdiff_t>(offset),
                   total.begin() + static_cast<std::ptrdiff_t>(offset + d));
    r.abs_error_estimate = err;
    r.n_evals = evals;
    offset += d;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

SegmentIntegralResult adaptive_simpson(const std::function<WValue(double)>& f, double a, double b,
                                       double tol, std::size_t max_evals) {
  SimpsonState st{&f, 0, max_evals};
  SegmentIntegralResult res;
  if (b <= a) {
    res.value = st.eval(a);
    std::fill(res.value.begin(), res.value.end(), 0.0);
    res.n_evals = st.evals;
    return res;
  }
  const WValue fa = st.eval(a);
  const WValue fm = st.eval(0.5 * (a + b));
  const WValue fb = st.eval(b);
  WValue whole(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) whole[i] = (b - a) / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
  double err = 0.0;
  res.value = simpson_panel(st, a, b, fa, fm, fb, whole, tol, 0, err);
  res.abs_error_estimate = err;
  res.n_evals = st.evals;
  return res;
}

double power_law_integral(double c, double kappa, double rho, double delta) {
  if (c <= 0.0 || delta <= 0.0) return 0.0;
  const double expo = 1.0 / rho + 1.0;
  const double stop = std::min(delta, c / kappa);
  const double rest = std::max(0.0, c - kappa * stop);
  return (std::pow(c, expo) - std::pow(rest, expo)) / (kappa * expo);
}

std::vector<SegmentIntegralResult> integrate_segment(std::span<const Functional> xis, Flow& flow,
                                                     double delta, const Semigroup& sg,
                                                     const QuadConfig& quad) {
  if (!(delta > 0.0)) throw ConfigError("integrate_segment needs delta > 0");
  const StateVector& state = flow.initial();
  const NormAssignment& norms = sg.norms();

  if (sg.is_scalar() && !quad.force_numeric) {
    const auto& prm = sg.scalar_params();
    const double v = state.value();
    const double magnitude =
        power_law_integral(std::pow(std::abs(v), prm.rho), prm.kappa, prm.rho, delta);
    const double signed_int = v < 0.0 ? -magnitude : magnitude;
    std::vector<SegmentIntegralResult> out;
    out.reserve(xis.size());
    for (const auto& xi : xis) {
      SegmentIntegralResult r;
      switch (xi.kind()) {
        case Functional::Kind::IdentityV2: r.value = {signed_int}; break;
        case Functional::Kind::NormV2: r.value = {magnitude + xi.shift() * delta}; break;
        case Functional::Kind::Linear:
          r.value = {xi.psi().front() * signed_int + xi.shift() * delta};
          break;
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  const WValue at_zero = stacked_apply(xis, sg.zero_state(), norms);
  WValue total(at_zero.size(), 0.0);
  double err = 0.0;
  std::size_t evals = 0;
  auto add_piece = [&](const std::function<WValue(double)>& f, double a, double b) {
    const double piece_tol = quad.tol * (b - a) / delta;
    const auto r = adaptive_simpson(f, a, b, piece_tol, quad.max_evals - evals);
    axpy(total, 1.0, r.value);
    err += r.abs_error_estimate;
    evals += r.n_evals;
  };

  if (sg.is_scalar()) {
    const std::function<WValue(double)> f = [&](double tau) {
      return stacked_apply(xis, flow.at(tau), norms);
    };
    const double t_ext = *flow.extinction_time();
    if (t_ext > 0.0 && t_ext < delta) {
      add_piece(f, 0.0, t_ext);
      add_piece(f, t_ext, delta);
    } else {
      add_piece(f, 0.0, delta);
    }
    return unstack(xis, total, state, err, evals);
  }

  // Grid flow: one panel per time step, constant tail after extinction.
  PLaplaceTrajectory& traj = *flow.trajectory();
  const double dt = sg.plaplace_problem().config().dt;
  const TimeSplit split = split_time(delta, dt);
  const std::size_t pieces = split.full_steps + (split.remainder > 0.0 ? 1 : 0);
  for (std::size_t k = 0; k < pieces; ++k) {
    const double a = static_cast<double>(k) * dt;
    const bool full = k < split.full_steps;
    const double len = full ? dt : split.remainder;
    if (traj.grid_state(k).is_zero()) {
      axpy(total, delta - a, at_zero);
      break;
    }
    const std::function<WValue(double)> f = [&, k, full, len](double r) {
      if (r == 0.0) return stacked_apply(xis, traj.grid_state(k), norms);
      if (full && r == len) return stacked_apply(xis, traj.grid_state(k + 1), norms);
      return stacked_apply(xis, traj.at_offset(k, r), norms);
    };
    const double piece_tol = quad.tol * len / delta;
    const auto r = adaptive_simpson(f, 0.0, len, piece_tol, quad.max_evals - evals);
    axpy(total, 1.0, r.value);
    err += r.abs_error_estimate;
    evals += r.n_evals;
  }
  return unstack(xis, total, state, err, evals);
}

SegmentIntegralResult integrate_segment(const Functional& xi, const StateVector& state,
                                        double delta, const Semigroup& sg, const QuadConfig& quad) {
  Flow flow = sg.flow(state);
  return integrate_segment(std::span<const Functional>(&xi, 1), flow, delta, sg, quad).front();
}

WValue integrate_cycle(const Functional& xi, std::span<const SegmentSpec> segments,
                       const Semigroup& sg, const QuadConfig& quad) {
  if (segments.empty()) throw ConfigError("integrate_cycle: empty cycle");
  WValue total(xi.dim(segments.front().state), 0.0);
  for (const auto& seg : segments) {
    const auto r = integrate_segment(xi, seg.state, seg.duration, sg, quad);
    axpy(total, 1.0, r.value);
  }
  return total;
}

}  // namespace regen
