#include "regen/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "regen/errors.hpp"

namespace regen {

std::vector<double> CycleSeries::scalar_integrals() const {
  std::vector<double> out;
  out.reserve(integrals.size());
  for (const auto& s : integrals) out.push_back(s.front());
  return out;
}

namespace {

void require_cycles(const CycleSeries& cycles, std::size_t min_n) {
  if (cycles.size() < min_n) {
    std::ostringstream msg;
    msg << "need at least " << min_n << " cycles, got " << cycles.size();
    throw InsufficientCycles(msg.str());
  }
  if (cycles.integrals.size() != cycles.tau.size()) {
    throw ConfigError("cycle series has mismatched integral and length counts");
  }
}

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

NuEstimate estimate_nu(const CycleSeries& cycles) {
  require_cycles(cycles, 2);
  const std::size_t n = cycles.size();
  const std::size_t d = cycles.dim();
  NuEstimate est;
  est.mean_S.assign(d, 0.0);
  double sum_tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) est.mean_S[j] += cycles.integrals[k][j];
    sum_tau += cycles.tau[k];
  }
  est.nu_hat.resize(d);
  for (std::size_t j = 0; j < d; ++j) est.nu_hat[j] = est.mean_S[j] / sum_tau;
  const double nd = static_cast<double>(n);
  for (double& m : est.mean_S) m /= nd;
  est.mean_tau = sum_tau / nd;

  est.se_nu.assign(d, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      const double y = cycles.integrals[k][j] - est.nu_hat[j] * cycles.tau[k];
      est.se_nu[j] += y * y;
    }
  }
  for (double& s : est.se_nu) s = std::sqrt(s / (nd * (nd - 1.0))) / est.mean_tau;
  return est;
}

double estimate_sigma2(const CycleSeries& cycles, double nu) {
  require_cycles(cycles, 2);
  double acc = 0.0, sum_tau = 0.0;
  for (std::size_t k = 0; k < cycles.size(); ++k) {
    const double y = cycles.integrals[k].front() - nu * cycles.tau[k];
    acc += y * y;
    sum_tau += cycles.tau[k];
  }
  const double n = static_cast<double>(cycles.size());
  return std::max(0.0, (acc / n) / (sum_tau / n));
}

Eigen::MatrixXd estimate_Q(const CycleSeries& cycles, std::span<const double> nu) {
  require_cycles(cycles, 2);
  const std::size_t d = cycles.dim();
  if (nu.size() != d) throw ConfigError("estimate_Q: nu has the wrong dimension");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(d));
  double sum_tau = 0.0;
  for (std::size_t k = 0; k < cycles.size(); ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      y(static_cast<Eigen::Index>(j)) = cycles.integrals[k][j] - nu[j] * cycles.tau[k];
    }
    q.selfadjointView<Eigen::Lower>().rankUpdate(y);
    sum_tau += cycles.tau[k];
  }
  Eigen::MatrixXd full = q.selfadjointView<Eigen::Lower>();
  const double n = static_cast<double>(cycles.size());
  full /= n * (sum_tau / n);
  return full;
}

CycleStats summarize_cycles(const CycleSeries& cycles) {
  const NuEstimate est = estimate_nu(cycles);
  CycleStats st;
  st.n_cycles = cycles.size();
  st.mean_S = est.mean_S;
  st.mean_tau = est.mean_tau;
  st.nu_hat = est.nu_hat;
  st.se_nu = est.se_nu;
  if (cycles.dim() == 1) {
    st.sigma2_hat = estimate_sigma2(cycles, est.nu_hat.front());
  } else {
    st.Q_hat = estimate_Q(cycles, est.nu_hat);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*st.Q_hat, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    st.Q_eigenvalues.assign(ev.data(), ev.data() + ev.size());
    st.sigma2_hat = st.Q_hat->trace();
  }
  return st;
}

void ScalarCycleAccumulator::Sums::add(double s_k, double tau_k, double nu0) {
  const double zk = s_k - nu0 * tau_k;
  s += s_k;
  tau += tau_k;
  z += zk;
  z2 += zk * zk;
  ztau += zk * tau_k;
  tau2 += tau_k * tau_k;
}

void ScalarCycleAccumulator::push(double s, double tau) {
  ++n_;
  if (fixed_) {
    sums_.add(s, tau, nu0_);
    return;
  }
  buf_s_.push_back(s);
  buf_tau_.push_back(tau);
  if (buf_s_.size() < kReference) return;
  double a = 0.0, b = 0.0;
  for (std::size_t k = 0; k < buf_s_.size(); ++k) {
    a += buf_s_[k];
    b += buf_tau_[k];
  }
  nu0_ = a / b;
  for (std::size_t k = 0; k < buf_s_.size(); ++k) sums_.add(buf_s_[k], buf_tau_[k], nu0_);
  fixed_ = true;
  buf_s_ = {};
  buf_tau_ = {};
}

CycleStats ScalarCycleAccumulator::finish() const {
  if (n_ < 2) throw InsufficientCycles("need at least 2 cycles, got " + std::to_string(n_));
  Sums sums = sums_;
  double nu0 = nu0_;
  if (!fixed_) {
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < buf_s_.size(); ++k) {
      a += buf_s_[k];
      b += buf_tau_[k];
    }
    nu0 = a / b;
    for (std::size_t k = 0; k < buf_s_.size(); ++k) sums.add(buf_s_[k], buf_tau_[k], nu0);
  }
  const double nd = static_cast<double>(n_);
  const double d = sums.z / sums.tau;  // nu_hat - nu0
  const double y2 = std::max(0.0, sums.z2 - 2.0 * d * sums.ztau + d * d * sums.tau2);
  CycleStats st;
  st.n_cycles = n_;
  st.mean_S = {sums.s / nd};
  st.mean_tau = sums.tau / nd;
  st.nu_hat = {nu0 + d};
  st.se_nu = {std::sqrt(y2 / (nd * (nd - 1.0))) / st.mean_tau};
  st.sigma2_hat = (y2 / nd) / st.mean_tau;
  return st;
}

std::vector<SllnPoint> slln_curve(std::span<const double> checkpoints,
                                  std::span<const WValue> integrals) {
  if (checkpoints.size() != integrals.size()) throw ConfigError("slln_curve: size mismatch");
  std::vector<SllnPoint> out;
  out.reserve(checkpoints.size());
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (c > 0 && !(checkpoints[c] > checkpoints[c - 1])) {
      throw ConfigError("slln_curve: checkpoints must be increasing");
    }
    WValue avg = integrals[c];
    for (double& v : avg) v /= checkpoints[c];
    out.push_back({checkpoints[c], std::move(avg)});
  }
  return out;
}

WValue clt_statistic(const WValue& integral, double t, std::span<const double> nu) {
  if (!(t > 0.0)) throw ConfigError("clt_statistic needs t > 0");
  if (nu.size() != integral.size()) throw ConfigError("clt_statistic: nu has the wrong dimension");
  WValue out(integral.size());
  const double root = std::sqrt(t);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (integral[j] - t * nu[j]) / root;
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_pvalue(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // P(K <= lambda) = sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double j = 2.0 * k - 1.0;
      cdf += std::exp(j * j * c);
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double stephens_lambda(double d, double n_eff) {
  const double root = std::sqrt(n_eff);
  return (root + 0.12 + 0.11 / root) * d;
}

}  // namespace

TestReport ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf,
                         double alpha) {
  if (samples.empty()) throw ConfigError("ks_one_sample: empty sample");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  TestReport r;
  r.name = "ks_one_sample";
  r.statistic = d;
  r.n_samples = x.size();
  r.p_value = kolmogorov_pvalue(stephens_lambda(d, n));
  r.alpha = alpha;
  r.pass = r.p_value > alpha;
  return r;
}

TestReport ks_test_normal(std::span<const double> samples, double sigma, double alpha) {
  if (!(sigma > 0.0)) {
    throw DegenerateSigma("CLT limit is a point mass (sigma = 0); normality test skipped");
  }
  if (samples.size() < 100) throw ConfigError("ks_test_normal needs at least 100 samples");
  TestReport r = ks_one_sample(samples, [sigma](double x) { return normal_cdf(x / sigma); }, alpha);
  r.name = "ks_normal";
  return r;
}

TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  TestReport r;
  r.name = "ks_two_sample";
  r.statistic = d;
  r.n_samples = x.size() + y.size();
  r.p_value = kolmogorov_pvalue(stephens_lambda(d, nx * ny / (nx + ny)));
  r.alpha = alpha;
  r.pass = r.p_value > alpha;
  return r;
}

std::optional<std::vector<double>> autocorrelations(std::span<const double> x, int max_lag) {
  if (x.empty()) return std::nullopt;
  // values equal up to rounding count as zero variance
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*hi - *lo <= 1e-12 * std::max(std::abs(*lo), std::abs(*hi))) return std::nullopt;
  const double m = mean_of(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  if (!(denom > 0.0)) return std::nullopt;
  std::vector<double> out;
  for (int k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t i = 0; i + static_cast<std::size_t>(k) < x.size(); ++i) {
      num += (x[i] - m) * (x[i + static_cast<std::size_t>(k)] - m);
    }
    out.push_back(num / denom);
  }
  return out;
}

CycleDiagnostics cycle_diagnostics(std::span<const double> S, std::span<const double> tau,
                                   double alpha) {
  if (S.size() != tau.size()) throw ConfigError("cycle_diagnostics: size mismatch");
  if (S.size() < 200) throw InsufficientCycles("cycle diagnostics need at least 200 cycles");
  CycleDiagnostics diag;
  diag.n = S.size();
  diag.band = 3.0 / std::sqrt(static_cast<double>(diag.n));
  diag.lag_autocorr_S = autocorrelations(S, 5);
  diag.lag_autocorr_tau = autocorrelations(tau, 5);
  diag.degenerate = !diag.lag_autocorr_S || !diag.lag_autocorr_tau;

  auto within = [&](const std::optional<std::vector<double>>& r) {
    return !r || std::all_of(r->begin(), r->end(), [&](double v) { return std::abs(v) <= diag.band; });
  };
  diag.autocorr_within_band = within(diag.lag_autocorr_S) && within(diag.lag_autocorr_tau);

  const std::size_t half = diag.n / 2;
  auto halves = [&](std::span<const double> x, const char* name) {
    TestReport r = ks_two_sample(x.first(half), x.subspan(half), alpha);
    r.name = name;
    return r;
  };
  diag.halves_ks_S = halves(S, "halves_ks_S");
  diag.halves_ks_tau = halves(tau, "halves_ks_tau");

  diag.lag1_S.name = "lag1_S";
  diag.lag1_S.n_samples = diag.n;
  diag.lag1_S.alpha = alpha;
  if (diag.lag_autocorr_S) {
    const double z = diag.lag_autocorr_S->front() * std::sqrt(static_cast<double>(diag.n));
    diag.lag1_S.statistic = z;
    diag.lag1_S.p_value = std::erfc(std::abs(z) / std::numbers::sqrt2);
    diag.lag1_S.pass = diag.lag1_S.p_value > alpha;
  } else {
    diag.lag1_S.degenerate = true;
    diag.lag1_S.pass = true;
    diag.lag1_S.note = "zero variance: cycle integrals are deterministic";
  }
  if (diag.degenerate) {
    for (TestReport* r : {&diag.halves_ks_S, &diag.halves_ks_tau}) {
      r->degenerate = true;
      r->note = "zero variance: cycle values are deterministic";
    }
  }
  return diag;
}

TestReport anscombe_check(std::span<const RandomIndexSum> replicates, double theta, double sigma2,
                          double mean_tau, double alpha) {
  if (!(theta > 0.0)) throw ConfigError("anscombe_check needs theta > 0");
  std::vector<double> normalized;
  normalized.reserve(replicates.size());
  const double root = std::sqrt(theta);
  for (const auto& r : replicates) normalized.push_back(r.sum / root);
  TestReport r = ks_test_normal(normalized, std::sqrt(sigma2 * mean_tau), alpha);
  r.name = "anscombe";
  double ratio = 0.0;
  for (const auto& rep : replicates) ratio += static_cast<double>(rep.count) / theta;
  std::ostringstream note;
  note << "mean N/theta = " << ratio / static_cast<double>(replicates.size());
  r.note = note.str();
  return r;
}

}  // namespace regen
