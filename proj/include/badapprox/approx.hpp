#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "badapprox/norms.hpp"

namespace badapprox {

// Approximation function psi: [1, inf) -> [0, inf) for an m x n system.
// All three families are handled in log space; phi(q) = q^n psi(q)^m and
// F(Q1, Q2) = int_{Q1}^{Q2} phi(q) dq / q.
class ApproxFunction {
 public:
  enum class Family { power_law, log_corrected, tabulated };

  ApproxFunction() = default;

  static ApproxFunction power_law(Dimensions dims, double kappa) {
    require(kappa >= 0.0 && std::isfinite(kappa), "PowerLaw needs kappa >= 0");
    ApproxFunction f;
    f.dims_ = dims;
    f.family_ = Family::power_law;
    f.param_ = kappa;
    return f;
  }

  static ApproxFunction log_corrected(Dimensions dims, double gamma) {
    require(gamma > 0.0 && std::isfinite(gamma), "LogCorrected needs gamma > 0");
    ApproxFunction f;
    f.dims_ = dims;
    f.family_ = Family::log_corrected;
    f.param_ = gamma;
    return f;
  }

  // Piecewise log-linear interpolation of (q, psi(q)) samples, extended
  // beyond the grid with the end slopes.
  static ApproxFunction tabulated(Dimensions dims, std::vector<std::pair<double, double>> samples) {
    require(samples.size() >= 2, "Tabulated psi needs at least two samples");
    ApproxFunction f;
    f.dims_ = dims;
    f.family_ = Family::tabulated;
    f.param_ = 1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto [q, v] = samples[i];
      require(q > 0 && std::isfinite(q) && v > 0 && std::isfinite(v), "Tabulated samples must be positive");
      if (i > 0) require(q > samples[i - 1].first, "Tabulated grid must be strictly increasing");
      f.t_.push_back(std::log(q));
      f.lphi_.push_back(dims.n * std::log(q) + dims.m * std::log(v));
    }
    return f;
  }

  Family family() const { return family_; }
  const Dimensions& dims() const { return dims_; }
  // kappa or gamma; 1 for tabulated
  double parameter() const { return param_; }
  bool is_zero() const { return family_ == Family::power_law && param_ == 0.0; }

  // log phi(e^t)
  double log_phi(double t) const {
    switch (family_) {
      case Family::power_law: return std::log(param_);
      case Family::log_corrected: return std::log(param_) - std::log(std::max(kLn2, t));
      case Family::tabulated: return tab_log_phi(t);
    }
    return 0.0;
  }

  double phi(double q) const {
    if (is_zero()) return 0.0;
    return std::exp(log_phi(std::log(q)));
  }

  double operator()(double q) const {
    if (is_zero()) return 0.0;
    const double t = std::log(q);
    return std::exp((log_phi(t) - dims_.n * t) / dims_.m);
  }

  // log psi(e^t); -inf for the zero function
  double log_psi_at(double t) const {
    if (is_zero()) return -std::numeric_limits<double>::infinity();
    return (log_phi(t) - dims_.n * t) / dims_.m;
  }

  double Psi(double q) const { return (*this)(q) / q; }
  double M() const { return phi(1.0); }

  ApproxFunction scaled(double gamma) const {
    require(gamma > 0.0, "scale must be positive");
    ApproxFunction f = *this;
    if (family_ == Family::tabulated) {
      for (auto& v : f.lphi_) v += dims_.m * std::log(gamma);
    } else {
      f.param_ *= std::pow(gamma, dims_.m);
    }
    return f;
  }

  // Exact certificate that phi is nonincreasing everywhere.
  bool monotone_witness() const {
    if (family_ != Family::tabulated) return true;
    for (std::size_t i = 0; i + 1 < t_.size(); ++i)
      if (lphi_[i + 1] > lphi_[i] + 1e-12 * std::max(1.0, std::abs(lphi_[i]))) return false;
    return true;
  }

  // True when int_1^inf phi(q) dq/q diverges.
  bool khinchin_divergent() const {
    switch (family_) {
      case Family::power_law: return param_ > 0.0;
      case Family::log_corrected: return true;
      case Family::tabulated: return slope(t_.size() - 2) >= 0.0;
    }
    return false;
  }

  // True when psi/psi_* -> 0, i.e. phi -> 0.
  bool decays_relative_to_dirichlet() const {
    switch (family_) {
      case Family::power_law: return param_ == 0.0;
      case Family::log_corrected: return true;
      case Family::tabulated: return slope(t_.size() - 2) < 0.0;
    }
    return false;
  }

  double F(double Q1, double Q2) const {
    require(Q1 > 0 && Q2 >= Q1, "F_psi needs 0 < Q1 <= Q2");
    return F_log(std::log(Q1), std::log(Q2));
  }

  // F between Q1 = e^{t1} and Q2 = e^{t2}.
  double F_log(double t1, double t2) const {
    require(t2 >= t1, "F_psi needs Q1 <= Q2");
    if (t2 == t1 || is_zero()) return 0.0;
    switch (family_) {
      case Family::power_law: return param_ * (t2 - t1);
      case Family::log_corrected: {
        double acc = 0.0;
        if (t1 < kLn2) {
          const double hi = std::min(t2, kLn2);
          acc += param_ * (hi - t1) / kLn2;
          t1 = hi;
        }
        if (t2 > t1) acc += param_ * std::log(t2 / t1);
        return acc;
      }
      case Family::tabulated: return tab_integral(t1, t2);
    }
    return 0.0;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    switch (family_) {
      case Family::power_law: os << "PowerLaw(kappa=" << param_ << ")"; break;
      case Family::log_corrected: os << "LogCorrected(gamma=" << param_ << ")"; break;
      case Family::tabulated: os << "Tabulated(" << t_.size() << " samples)"; break;
    }
    return os.str();
  }

 private:
  std::size_t piece(double t) const {
    if (t <= t_.front()) return 0;
    if (t >= t_.back()) return t_.size() - 2;
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    return static_cast<std::size_t>(it - t_.begin()) - 1;
  }
  double slope(std::size_t i) const { return (lphi_[i + 1] - lphi_[i]) / (t_[i + 1] - t_[i]); }
  double tab_log_phi(double t) const {
    const std::size_t i = piece(t);
    return lphi_[i] + slope(i) * (t - t_[i]);
  }
  // int_a^b exp(l0 + c (t - a)) dt
  static double exp_linear_integral(double l0, double c, double len) {
    if (std::abs(c * len) < 1e-8) return std::exp(l0) * len * (1.0 + 0.5 * c * len);
    return std::exp(l0) * std::expm1(c * len) / c;
  }
  double tab_integral(double t1, double t2) const {
    double acc = 0.0;
    double a = t1;
    while (a < t2) {
      const std::size_t i = piece(a);
      double b = t2;
      if (i + 2 < t_.size()) b = std::min(b, t_[i + 1]);
      acc += exp_linear_integral(tab_log_phi(a), slope(i), b - a);
      a = b;
    }
    return acc;
  }

  Dimensions dims_{};
  Family family_ = Family::power_law;
  double param_ = 0.0;
  std::vector<double> t_;
  std::vector<double> lphi_;
};

// Dimension function f: (0, 1] -> (0, inf).  Values are handled as
// log f(rho) - mn log rho, i.e. relative to f_*(rho) = rho^{mn}.
class DimFunction {
 public:
  enum class Family { power, log_power, corollary };

  static DimFunction power(Dimensions dims, double s) {
    require(s > 0.0 && s <= dims.D(), "Power dimension function needs s in (0, mn]");
    DimFunction f(dims, Family::power, s);
    return f;
  }
  static DimFunction log_power(Dimensions dims, double s) {
    require(s > 0.0 && std::isfinite(s), "LogPower needs s > 0");
    return DimFunction(dims, Family::log_power, s);
  }
  static DimFunction corollary(const ApproxFunction& psi, double rho0) {
    require(rho0 > 0.0 && rho0 <= 1.0, "CorollaryF needs rho0 in (0, 1]");
    DimFunction f(psi.dims(), Family::corollary, rho0);
    f.psi_ = psi;
    return f;
  }

  Family family() const { return family_; }
  double parameter() const { return param_; }
  const ApproxFunction& psi() const { return psi_; }
  const Dimensions& dims() const { return dims_; }

  // log(f(rho) / rho^{mn})
  double log_ratio_to_fstar(double rho) const {
    require(rho > 0.0, "dimension functions need rho > 0");
    const double lr = std::log(rho);
    switch (family_) {
      case Family::power: return (param_ - dims_.D()) * lr;
      case Family::log_power: return param_ * std::log(std::abs(lr));
      case Family::corollary: {
        const double r = std::min(rho, param_);
        return psi_.F_log(0.0, -dims_.alpha() * std::log(r)) + dims_.D() * (std::log(r) - lr);
      }
    }
    return 0.0;
  }

  double log_value(double rho) const { return dims_.D() * std::log(rho) + log_ratio_to_fstar(rho); }
  double operator()(double rho) const { return std::exp(log_value(rho)); }

  // Right end of the interval (0, rho0] on which f is a dimension function.
  double rho0() const {
    switch (family_) {
      case Family::power: return 1.0;
      case Family::log_power: return std::exp(-param_ / dims_.D());
      case Family::corollary: return param_;
    }
    return 1.0;
  }

  // Checks nondecreasing and decaying behaviour on rho0 * base^k, k = 0..count.
  bool check_on_grid(double base = 0.5, int count = 60) const {
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = count; k >= 0; --k) {
      const double v = log_value(rho0() * std::pow(base, k));
      if (v < prev - 1e-12 * std::abs(prev)) return false;
      prev = v;
    }
    return log_value(rho0() * std::pow(base, count)) < log_value(rho0() * std::pow(base, count / 2));
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    switch (family_) {
      case Family::power: os << "Power(s=" << param_ << ")"; break;
      case Family::log_power: os << "LogPower(s=" << param_ << ")"; break;
      case Family::corollary: os << "CorollaryF(" << psi_.describe() << ", rho0=" << param_ << ")"; break;
    }
    return os.str();
  }

 private:
  DimFunction(Dimensions dims, Family fam, double p) : dims_(dims), family_(fam), param_(p) {}

  Dimensions dims_;
  Family family_;
  double param_;
  ApproxFunction psi_;
};

}  // namespace badapprox
