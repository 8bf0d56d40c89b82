#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace regen {

enum class SpaceTag { Scalar, Grid };

/// An element of the state space. Scalar states hold one value; grid states
/// hold one value per cell and use discrete L^q norms weighted by the cell
/// width `h`.
class StateVector {
 public:
  StateVector() = default;

  static StateVector scalar(double v);
  static StateVector grid(std::vector<double> values, double h);
  static StateVector zeros_like(const StateVector& v);

  SpaceTag tag() const { return tag_; }
  bool is_scalar() const { return tag_ == SpaceTag::Scalar; }
  std::size_t size() const { return values_.size(); }
  double h() const { return h_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  /// Value of a scalar state.
  double value() const { return values_.front(); }

  bool is_zero() const;
  bool all_finite() const;
  bool compatible(const StateVector& other) const;

  StateVector& operator+=(const StateVector& other);
  StateVector& operator-=(const StateVector& other);
  StateVector& operator*=(double s);

  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
  friend StateVector operator-(StateVector a) { return a *= -1.0; }
  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  SpaceTag tag_ = SpaceTag::Scalar;
  std::vector<double> values_{0.0};
  double h_ = 1.0;
};

// Discrete norms. For a scalar state every norm is |v|.
double norm_lq(const StateVector& v, double q);
double norm_l1(const StateVector& v);
double norm_l2(const StateVector& v);
double norm_inf(const StateVector& v);

/// Cell-weighted mean, sum_i v_i h / (n h).
double mean(const StateVector& v);

/// Sum of v_i * h, i.e. the discrete integral.
double mass(const StateVector& v);

/// Which discrete norm plays each role: ambient V, extinction space V1, and
/// the functional space V2. Scalar states ignore the assignment.
struct NormAssignment {
  double q_v = 1.0;
  double q_v1 = 2.0;
  double q_v2 = 2.0;

  double v(const StateVector& s) const { return norm_lq(s, q_v); }
  double v1(const StateVector& s) const { return norm_lq(s, q_v1); }
  double v2(const StateVector& s) const { return norm_lq(s, q_v2); }
};

}  // namespace regen
