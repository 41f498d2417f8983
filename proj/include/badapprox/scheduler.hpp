#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "badapprox/approx.hpp"

namespace badapprox {

// Block sequence N_k = 2^{l_k}.  Products are kept as integer log2 values:
// log2 N^k = sum_{j<=k} l_j, and log Q^k = alpha * log2 N^k * log 2.
struct Schedule {
  ApproxFunction psi;
  double beta = 0.0;
  double alpha = 0.5;
  std::vector<std::int64_t> exponents;  // l_1, ..., l_kmax
  std::vector<std::int64_t> log2_prod;  // log2 N^0 = 0, ..., log2 N^kmax

  std::size_t size() const { return exponents.size(); }
  // N_k for k = 1..size(), as a power-of-two exponent
  std::int64_t exponent(std::size_t k) const { return exponents.at(k - 1); }
  double log_N_prod(std::size_t k) const { return static_cast<double>(log2_prod.at(k)) * kLn2; }
  double log_Q(std::size_t k) const { return alpha * log_N_prod(k); }
  double Q(std::size_t k) const { return std::exp(log_Q(k)); }
  // F_psi(Q^k, Q^{k+1})
  double block_F(std::size_t k) const { return psi.F_log(log_Q(k), log_Q(k + 1)); }
  double upper_slack() const { return psi.M() * alpha * kLn2; }
};

inline constexpr std::int64_t kMaxLog2Product = std::int64_t{1} << 62;

namespace detail {

inline double block_F(const ApproxFunction& psi, double alpha, std::int64_t L, std::int64_t l) {
  return psi.F_log(alpha * static_cast<double>(L) * kLn2, alpha * static_cast<double>(L + l) * kLn2);
}

// Smallest l >= 1 with F(2^{alpha L}, 2^{alpha (L+l)}) >= beta, by galloping then bisection.
inline std::int64_t smallest_exponent(const ApproxFunction& psi, double beta, double alpha, std::int64_t L) {
  const std::int64_t cap = kMaxLog2Product - L;
  if (cap < 1 || block_F(psi, alpha, L, cap) < beta) {
    if (!psi.khinchin_divergent()) throw std::domain_error("divergence assumption violated");
    throw std::overflow_error("block product exceeds 2^62 capacity");
  }
  std::int64_t hi = 1;
  while (block_F(psi, alpha, L, hi) < beta) hi = hi > cap / 2 ? cap : hi * 2;
  std::int64_t lo = hi / 2;  // F(lo) < beta, or lo == 0
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (block_F(psi, alpha, L, mid) >= beta) hi = mid;
    else lo = mid;
  }
  return hi;
}

inline void append_block(Schedule& s, std::int64_t l) {
  const std::int64_t L = s.log2_prod.back();
  if (l > kMaxLog2Product - L) throw std::overflow_error("block product exceeds 2^62 capacity");
  s.exponents.push_back(l);
  s.log2_prod.push_back(L + l);
}

}  // namespace detail

inline Schedule build_schedule(const ApproxFunction& psi, double beta, double alpha, std::size_t k_max) {
  require(beta > 0 && std::isfinite(beta), "beta must be positive");
  require(alpha > 0 && alpha < 1, "alpha must lie in (0,1)");
  require(k_max >= 1, "k_max must be positive");
  require(psi.monotone_witness(), "psi must be nice (phi nonincreasing)");
  if (psi.is_zero()) throw std::domain_error("divergence assumption violated");
  Schedule s{psi, beta, alpha, {}, {0}};
  for (std::size_t k = 0; k < k_max; ++k)
    detail::append_block(s, detail::smallest_exponent(psi, beta, alpha, s.log2_prod.back()));
  return s;
}

// Constant exponent ceil(beta / (kappa alpha log 2)) for psi = kappa psi_*.
inline std::int64_t constant_exponent(double kappa, double beta, double alpha) {
  require(kappa > 0 && beta > 0, "kappa and beta must be positive");
  require(alpha > 0 && alpha < 1, "alpha must lie in (0,1)");
  const double ratio = beta / (kappa * alpha * kLn2);
  const double nearest = std::round(ratio);
  // ratios within rounding noise of an integer are that integer
  const double l = std::abs(ratio - nearest) <= 1e-12 * std::max(1.0, nearest) ? nearest : std::ceil(ratio);
  if (!(l <= static_cast<double>(kMaxLog2Product))) throw std::overflow_error("block exponent exceeds 2^62");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(l));
}

inline Schedule constant_schedule(const Dimensions& dims, double kappa, double beta, double alpha,
                                  std::size_t k_max) {
  require(k_max >= 1, "k_max must be positive");
  const std::int64_t l = constant_exponent(kappa, beta, alpha);
  Schedule s{ApproxFunction::power_law(dims, kappa), beta, alpha, {}, {0}};
  for (std::size_t k = 0; k < k_max; ++k) detail::append_block(s, l);
  return s;
}

struct BlockCheck {
  bool ok = true;
  std::size_t first_bad = 0;
  double worst_lower = 0.0;  // min over blocks of F - beta
  double worst_upper = 0.0;  // min over blocks of beta + slack - F
};

// Both bounds allow 1e-12 relative slack for rounding in F.
inline BlockCheck check_block_bounds(const Schedule& s) {
  BlockCheck c;
  c.worst_lower = c.worst_upper = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double F = s.block_F(k);
    const double lo = F - s.beta;
    const double hi = s.beta + s.upper_slack() - F;
    c.worst_lower = std::min(c.worst_lower, lo);
    c.worst_upper = std::min(c.worst_upper, hi);
    const bool good = lo >= -1e-12 * s.beta && hi >= -1e-12 * (s.beta + s.upper_slack());
    if (!good && c.ok) {
      c.ok = false;
      c.first_bad = k;
    }
  }
  return c;
}

}  // namespace badapprox
