#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regen/functionals.hpp"

namespace regen {

/// Per-cycle data for one functional: integrals S_n and lengths tau_n.
struct CycleSeries {
  std::vector<WValue> integrals;
  std::vector<double> tau;

  std::size_t size() const { return tau.size(); }
  std::size_t dim() const { return integrals.empty() ? 0 : integrals.front().size(); }
  void push(const WValue& s, double t) {
    integrals.push_back(s);
    tau.push_back(t);
  }
  /// First component of every integral.
  std::vector<double> scalar_integrals() const;
};

struct NuEstimate {
  WValue nu_hat;
  /// Delta-method standard error, per component.
  WValue se_nu;
  double mean_tau = 0.0;
  WValue mean_S;
};

/// Ratio estimator sum S_n / sum tau_n. Throws InsufficientCycles below two
/// cycles.
NuEstimate estimate_nu(const CycleSeries& cycles);

/// (1 / mean tau) (1/n) sum (S_n - nu tau_n)^2 for scalar W.
double estimate_sigma2(const CycleSeries& cycles, double nu);

/// Covariance of (S_n - nu tau_n) / sqrt(mean tau) over the grid basis,
/// normalized like estimate_sigma2 so that psi^T Q psi is the scalar
/// variance of the projected functional.
Eigen::MatrixXd estimate_Q(const CycleSeries& cycles, std::span<const double> nu);

struct CycleStats {
  std::size_t n_cycles = 0;
  WValue mean_S;
  double mean_tau = 0.0;
  WValue nu_hat;
  WValue se_nu;
  double sigma2_hat = 0.0;              // scalar W
  std::optional<Eigen::MatrixXd> Q_hat;  // vector W
  std::vector<double> Q_eigenvalues;
};

CycleStats summarize_cycles(const CycleSeries& cycles);

/// Streaming equivalent of summarize_cycles for one scalar functional, for
/// pilot runs too long to store. The first cycles fix a reference ratio nu0
/// and later sums use Z = S - nu0 tau, so sigma2 does not suffer cancellation.
class ScalarCycleAccumulator {
 public:
  void push(double s, double tau);
  std::size_t size() const { return n_; }
  CycleStats finish() const;

 private:
  struct Sums {
    double s = 0.0, tau = 0.0, z = 0.0, z2 = 0.0, ztau = 0.0, tau2 = 0.0;
    void add(double s_k, double tau_k, double nu0);
  };
  static constexpr std::size_t kReference = 1024;
  std::vector<double> buf_s_, buf_tau_;
  double nu0_ = 0.0;
  bool fixed_ = false;
  std::size_t n_ = 0;
  Sums sums_;
};

/// Running time averages A_t = (1/t) int_0^t Xi.
struct SllnPoint {
  double t;
  WValue average;
};
std::vector<SllnPoint> slln_curve(std::span<const double> checkpoints,
                                  std::span<const WValue> integrals);

/// (int_0^t Xi - t nu) / sqrt(t).
WValue clt_statistic(const WValue& integral, double t, std::span<const double> nu);

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_samples = 0;
  double alpha = 0.01;
  bool pass = false;
  /// Set when the test is skipped because the limit is a point mass.
  bool degenerate = false;
  std::string note;
};

double normal_cdf(double x);
/// Asymptotic Kolmogorov tail P(K > lambda).
double kolmogorov_pvalue(double lambda);

/// One-sample KS against an arbitrary continuous CDF.
TestReport ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf,
                         double alpha = 0.01);
/// One-sample KS against N(0, sigma^2). Throws DegenerateSigma if sigma <= 0.
TestReport ks_test_normal(std::span<const double> samples, double sigma, double alpha = 0.01);
TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha = 0.01);

/// Lag-k sample autocorrelations, k = 1..max_lag; nullopt for zero variance.
std::optional<std::vector<double>> autocorrelations(std::span<const double> x, int max_lag);

struct CycleDiagnostics {
  std::size_t n = 0;
  std::optional<std::vector<double>> lag_autocorr_S;
  std::optional<std::vector<double>> lag_autocorr_tau;
  double band = 0.0;  // 3 / sqrt(n)
  bool autocorr_within_band = false;
  TestReport halves_ks_S;
  TestReport halves_ks_tau;
  /// z-test of the lag-1 autocorrelation of S_n against zero.
  TestReport lag1_S;
  bool degenerate = false;
};

/// Requires at least 200 cycles.
CycleDiagnostics cycle_diagnostics(std::span<const double> S, std::span<const double> tau,
                                   double alpha = 0.01);

/// Sum of the first `count` centred cycle values Y_k = S_k - nu tau_k from
/// one replicate.
struct RandomIndexSum {
  double sum = 0.0;
  std::uint64_t count = 0;
};

/// KS test of sum / sqrt(theta) against N(0, sigma2 * mean_tau).
TestReport anscombe_check(std::span<const RandomIndexSum> replicates, double theta, double sigma2,
                          double mean_tau, double alpha = 0.01);

}  // namespace regen
