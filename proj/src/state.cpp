#include "regen/state.hpp"

#include <algorithm>
#include <cmath>

#include "regen/errors.hpp"

namespace regen {

StateVector StateVector::scalar(double v) {
  StateVector s;
  s.values_ = {v};
  return s;
}

StateVector StateVector::grid(std::vector<double> values, double h) {
  if (values.empty()) throw ConfigError("grid state needs at least one cell");
  if (!(h > 0.0)) throw ConfigError("grid state needs h > 0");
  StateVector s;
  s.tag_ = SpaceTag::Grid;
  s.values_ = std::move(values);
  s.h_ = h;
  return s;
}

StateVector StateVector::zeros_like(const StateVector& v) {
  StateVector s = v;
  std::fill(s.values_.begin(), s.values_.end(), 0.0);
  return s;
}

bool StateVector::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return x == 0.0; });
}

bool StateVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

bool StateVector::compatible(const StateVector& other) const {
  return tag_ == other.tag_ && values_.size() == other.values_.size() && h_ == other.h_;
}

StateVector& StateVector::operator+=(const StateVector& other) {
  if (!compatible(other)) throw ConfigError("state dimension mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& other) {
  if (!compatible(other)) throw ConfigError("state dimension mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

StateVector& StateVector::operator*=(double s) {
  for (double& x : values_) x *= s;
  return *this;
}

double norm_lq(const StateVector& v, double q) {
  if (v.is_scalar()) return std::abs(v.value());
  if (std::isinf(q)) return norm_inf(v);
  double acc = 0.0;
  if (q == 1.0) {
    for (double x : v.values()) acc += std::abs(x);
    return acc * v.h();
  }
  if (q == 2.0) {
    for (double x : v.values()) acc += x * x;
    return std::sqrt(acc * v.h());
  }
  for (double x : v.values()) acc += std::pow(std::abs(x), q);
  return std::pow(acc * v.h(), 1.0 / q);
}

double norm_l1(const StateVector& v) { return norm_lq(v, 1.0); }
double norm_l2(const StateVector& v) { return norm_lq(v, 2.0); }

double norm_inf(const StateVector& v) {
  double m = 0.0;
  for (double x : v.values()) m = std::max(m, std::abs(x));
  return m;
}

double mass(const StateVector& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x;
  return acc * v.h();
}

double mean(const StateVector& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace regen
