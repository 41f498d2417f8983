#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "badapprox/common.hpp"

namespace badapprox {

using BigInt = boost::multiprecision::cpp_int;

struct CFExpansion {
  BigInt num, den;                  // x = num/den exactly (a double is a dyadic rational)
  std::vector<BigInt> quotients;    // a_1, ..., a_K
  std::vector<BigInt> p, q;         // convergents p_k/q_k, k = 0..K (p_0/q_0 = 0/1)
  bool terminated = false;          // expansion of x ended within the requested depth
  bool reliable_rational = false;   // terminated with q_K <= 2^26
};

inline constexpr double kReliableDenominator = 67108864.0;  // 2^26

namespace detail {

inline std::pair<BigInt, BigInt> exact_rational(double x) {
  require(std::isfinite(x), "x must be finite");
  int e = 0;
  const double mant = std::frexp(x, &e);
  const auto mi = static_cast<std::int64_t>(std::ldexp(mant, 53));
  BigInt num = mi, den = 1;
  e -= 53;
  if (e >= 0) num <<= e;
  else den <<= -e;
  const BigInt g = boost::multiprecision::gcd(num, den);
  return {num / g, den / g};
}

}  // namespace detail

// Continued fraction of a rational x in (0,1), up to `depth` partial quotients.
inline CFExpansion expand_rational(const BigInt& num, const BigInt& den, int depth) {
  require(den > 0 && num > 0 && num < den, "x must lie in (0,1)");
  CFExpansion cf;
  cf.num = num;
  cf.den = den;
  cf.p = {0};
  cf.q = {1};
  BigInt pm1 = 1, qm1 = 0;  // p_{-1}, q_{-1}
  BigInt a = den, b = num;  // remainder pair: alpha_k = a / b
  for (int k = 1; k <= depth; ++k) {
    if (b == 0) {
      cf.terminated = true;
      break;
    }
    const BigInt ak = a / b;
    const BigInt r = a % b;
    const BigInt pk = ak * cf.p.back() + pm1;
    const BigInt qk = ak * cf.q.back() + qm1;
    pm1 = cf.p.back();
    qm1 = cf.q.back();
    cf.quotients.push_back(ak);
    cf.p.push_back(pk);
    cf.q.push_back(qk);
    a = b;
    b = r;
  }
  if (b == 0) cf.terminated = true;
  cf.reliable_rational = cf.terminated && cf.q.back() <= BigInt(67108864);
  return cf;
}

inline CFExpansion expand(double x, int depth) {
  require(x > 0.0 && x < 1.0, "x must lie in (0,1)");
  const auto [num, den] = detail::exact_rational(x);
  return expand_rational(num, den, depth);
}

struct LagrangeEstimate {
  double value = 0.0;
  double error = 0.0;
  bool rational = false;
  int depth_used = 0;
};

namespace detail {

// q_k |q_k x - p_k| = 1/(alpha_{k+1} + q_{k-1}/q_k) with alpha_{k+1} taken
// from the quotient tail a_{k+1}, ..., a_K.
inline double convergent_gap(const std::vector<double>& a, std::size_t k, std::size_t K) {
  double tail = 0.0;
  for (std::size_t j = K; j > k + 1; --j) tail = 1.0 / (a[j - 1] + tail);
  const double alpha = a[k] + tail;
  double back = 0.0;  // [0; a_k, ..., a_1]
  for (std::size_t j = 1; j <= k; ++j) back = 1.0 / (a[j - 1] + back);
  return 1.0 / (alpha + back);
}

inline LagrangeEstimate lagrange_from_quotients(const std::vector<double>& a) {
  LagrangeEstimate est;
  const std::size_t K = a.size();
  est.depth_used = static_cast<int>(K);
  if (K < 6) {
    // too short for a tail window
    est.value = K < 2 ? 0.0 : convergent_gap(a, K - 1, K);
    est.error = K < 2 ? 1.0 : est.value;
    return est;
  }
  // The convergent ratio and the truncated tail are both accurate to about
  // q_{K/2}^{-2} at the middle index, so the window sits there.
  const std::size_t mid = K / 2;
  double lo = 1e300, hi = -1e300;
  for (std::size_t k = mid - 1; k <= mid + 1; ++k) {
    const double v = convergent_gap(a, k, K);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // truncation error: change of the estimate when the last quotient is dropped
  double drop = 0.0;
  for (std::size_t k = mid - 1; k <= mid + 1; ++k)
    drop = std::max(drop, std::abs(convergent_gap(a, k, K) - convergent_gap(a, k, K - 1)));
  est.value = lo;
  est.error = (hi - lo) + drop;
  return est;
}

}  // namespace detail

// Convergent-based estimate of liminf_q q ||q x||.
inline LagrangeEstimate lagrange_constant(double x, int depth) {
  require(depth >= 1 && depth <= 64, "depth must lie in [1, 64]");
  const CFExpansion cf = expand(x, depth);
  LagrangeEstimate est;
  if (cf.reliable_rational) {
    est.rational = true;
    return est;
  }
  std::vector<double> a;
  for (std::size_t k = 0; k < cf.quotients.size(); ++k) {
    if (cf.q[k + 1] > BigInt(67108864)) break;
    a.push_back(cf.quotients[k].convert_to<double>());
  }
  return detail::lagrange_from_quotients(a);
}

// The same estimate for x = [0; a_1, a_2, ...] given by its quotients.
inline LagrangeEstimate lagrange_constant_quotients(const std::vector<std::uint64_t>& quotients) {
  std::vector<double> a(quotients.begin(), quotients.end());
  for (double v : a) require(v >= 1, "partial quotients must be positive");
  return detail::lagrange_from_quotients(a);
}

struct BadTest {
  bool verdict = false;
  bool indeterminate = false;
};

inline BadTest bad_kappa_test(double x, double kappa, int depth) {
  const LagrangeEstimate est = lagrange_constant(x, depth);
  if (est.rational) return {false, false};
  if (kappa <= 0.0) return {true, false};
  if (est.value - est.error > kappa) return {true, false};
  if (est.value + est.error < kappa) return {false, false};
  return {false, true};
}

// min q_k |q_k x - p_k| over convergents with q_lo <= q_k <= q_hi, exactly
// for the rational x = num/den.  Returns +inf if no convergent is in range.
inline double min_convergent_gap(const BigInt& num, const BigInt& den, double q_lo, double q_hi) {
  const CFExpansion cf = expand_rational(num, den, 200);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < cf.q.size(); ++k) {
    const double qk = cf.q[k].convert_to<double>();
    if (qk < q_lo || qk > q_hi) continue;
    BigInt diff = cf.q[k] * num - cf.p[k] * den;
    if (diff < 0) diff = -diff;
    const double gap = (boost::multiprecision::cpp_rational(cf.q[k] * diff, den)).convert_to<double>();
    best = std::min(best, gap);
  }
  return best;
}

struct HensleyValue {
  double value = 1.0;
  bool outside_guard = false;  // kappa outside (0, 0.05]
};

// Truncated Hensley expansion; the O(kappa^2) remainder is dropped.
inline HensleyValue hensley_dim(double kappa) {
  require(kappa >= 0.0, "kappa must be nonnegative");
  HensleyValue h;
  h.outside_guard = !(kappa > 0.0 && kappa <= 0.05);
  if (kappa == 0.0) return h;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  h.value = 1.0 - (6.0 / pi2) * kappa - (72.0 / (pi2 * pi2)) * kappa * kappa * std::abs(std::log(kappa));
  return h;
}

inline std::pair<double, double> kurzweil_band(double kappa) {
  require(kappa >= 0.0, "kappa must be nonnegative");
  return {1.0 - 0.99 * kappa, 1.0 - 0.25 * kappa};
}

struct Threshold {
  double value;
  std::string note;
};

inline Threshold moreira_threshold() {
  return {1.0 / 3.0, "Moreira: dim Bad_kappa (m=n=1) vanishes iff kappa >= 1/3"};
}

}  // namespace badapprox
