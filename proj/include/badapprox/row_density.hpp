#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "badapprox/common.hpp"

namespace badapprox {

// Distribution of sum_j t_j q_j with t_j i.i.d. uniform on [0,1]
// (generalized Irwin-Hall).  With a_j = |q_j| and k nonzero entries,
//   k! prod(a_j) CDF(x0 + y) = sum_c w_c (y - c)_+^k,
// where sum_c w_c z^c = prod_j (1 - z^{a_j}) and x0 = sum_j min(q_j, 0).
// Between consecutive breakpoints the right side is a polynomial with exact
// integer coefficients; those are built by Taylor shifts in cpp_int.
class RowDensity {
 public:
  using Big = boost::multiprecision::cpp_int;
  static constexpr std::size_t kMaxEntries = 20;

  explicit RowDensity(std::span<const std::int64_t> q) {
    require(q.size() <= kMaxEntries, "row density supports at most 20 entries");
    std::vector<std::int64_t> a;
    for (auto v : q) {
      if (v < 0) x0_ += v;
      if (v != 0) a.push_back(v < 0 ? -v : v);
    }
    k_ = static_cast<int>(a.size());
    for (auto v : a) total_ += v;
    if (k_ == 0) return;

    std::map<std::int64_t, std::int64_t> w{{0, 1}};
    for (auto aj : a) {
      std::map<std::int64_t, std::int64_t> next = w;
      for (auto [c, v] : w) next[c + aj] -= v;
      w.clear();
      for (auto [c, v] : next)
        if (v != 0) w.emplace(c, v);
    }

    denom_ = 1;
    for (int i = 2; i <= k_; ++i) denom_ *= i;
    for (auto aj : a) denom_ *= aj;

    std::vector<Big> poly(k_ + 1, Big(0));  // coefficients in u = y - breakpoint
    std::vector<Big> binom(k_ + 1);
    binom[0] = 1;
    for (int i = 1; i <= k_; ++i) binom[i] = binom[i - 1] * (k_ - i + 1) / i;
    std::int64_t prev = 0;
    bool first = true;
    for (auto [c, v] : w) {
      if (!first) taylor_shift(poly, c - prev);
      first = false;
      poly[k_] += v;  // w_c u^k
      prev = c;
      if (c < total_) {
        breaks_.push_back(c);
        coef_.emplace_back(poly.size());
        for (std::size_t i = 0; i < poly.size(); ++i) coef_.back()[i] = ratio(poly[i], denom_);
      } else {
        final_poly_ = poly;
      }
    }
  }

  int nonzero_count() const { return k_; }
  std::int64_t support_lo() const { return x0_; }
  std::int64_t support_hi() const { return x0_ + total_; }
  std::size_t piece_count() const { return breaks_.size(); }
  const Big& denominator() const { return denom_; }

  // Exact: the polynomial past the last breakpoint is the constant k! prod a_j.
  bool integrates_to_one() const {
    if (k_ == 0) return true;
    if (final_poly_.empty() || final_poly_[0] != denom_) return false;
    for (std::size_t i = 1; i < final_poly_.size(); ++i)
      if (final_poly_[i] != 0) return false;
    return true;
  }

  double cdf(double x) const {
    const long double y = static_cast<long double>(x) - x0_;
    if (k_ == 0) return y >= 0 ? 1.0 : 0.0;
    if (y <= 0) return 0.0;
    if (y >= total_) return 1.0;
    const std::size_t i = locate(y);
    const long double u = y - breaks_[i];
    long double acc = 0;
    for (int j = k_; j >= 0; --j) acc = acc * u + coef_[i][j];
    return static_cast<double>(std::clamp(acc, 0.0L, 1.0L));
  }

  double pdf(double x) const {
    const long double y = static_cast<long double>(x) - x0_;
    if (k_ == 0 || y < 0 || y > total_) return 0.0;
    const std::size_t i = locate(std::min<long double>(y, total_ - 1e-300L));
    const long double u = y - breaks_[i];
    long double acc = 0;
    for (int j = k_; j >= 1; --j) acc = acc * u + j * coef_[i][j];
    return static_cast<double>(std::max(acc, 0.0L));
  }

  // P(lo <= sum <= hi)
  double interval(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    return std::max(0.0, cdf(hi) - cdf(lo));
  }

 private:
  std::size_t locate(long double y) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), y,
                               [](long double v, std::int64_t b) { return v < static_cast<long double>(b); });
    return static_cast<std::size_t>(it - breaks_.begin()) - 1;
  }

  // poly(u) <- poly(u + s)
  static void taylor_shift(std::vector<Big>& poly, std::int64_t s) {
    const std::size_t deg = poly.size() - 1;
    for (std::size_t i = 0; i < deg; ++i)
      for (std::size_t j = deg - 1; j + 1 > i; --j) poly[j] += poly[j + 1] * s;
  }

  static long double ratio(const Big& num, const Big& den) {
    using boost::multiprecision::cpp_rational;
    return cpp_rational(num, den).convert_to<long double>();
  }

  int k_ = 0;
  std::int64_t x0_ = 0;
  std::int64_t total_ = 0;
  Big denom_ = 1;
  std::vector<std::int64_t> breaks_;
  std::vector<std::vector<long double>> coef_;
  std::vector<Big> final_poly_;
};

}  // namespace badapprox
