#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "badapprox/approx.hpp"
#include "badapprox/norms.hpp"

namespace badapprox {

inline void check_norm_dims(const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
  require(mu.dim == dims.m, "mu must be a norm on R^m");
  require(nv.dim == dims.n, "nu must be a norm on R^n");
}

inline double theta(const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
  check_norm_dims(dims, mu, nv);
  return unit_ball_volume(mu) * unit_ball_volume(nv) / (2.0 * zeta(dims.d())) * dims.D() / dims.d();
}

inline double eta(const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
  check_norm_dims(dims, mu, nv);
  return dims.n * unit_ball_volume(mu) * unit_ball_volume(nv) / (2.0 * zeta(dims.d()));
}

struct LExponent {
  double value = 0.0;
  double error = 0.0;  // zero for analytic limits
  bool analytic = false;
};

// rho_k = 2^{-k}, k = 8..60
inline std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int k = 8; k <= 60; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

namespace detail {

inline std::optional<double> analytic_L(const DimFunction& f, const ApproxFunction& psi) {
  using AF = ApproxFunction::Family;
  using DF = DimFunction::Family;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Dimensions& dims = psi.dims();
  if (psi.family() == AF::tabulated) return std::nullopt;
  const double c = psi.parameter();
  const bool pw = psi.family() == AF::power_law;
  switch (f.family()) {
    case DF::log_power:
      // log ratio = s log|log rho| grows slower than any power-law F
      return pw ? 0.0 : f.parameter() / c;
    case DF::power: {
      const double deficit = dims.D() - f.parameter();
      if (pw) return deficit / (c * dims.alpha());
      return deficit > 0 ? inf : 0.0;
    }
    case DF::corollary: {
      const ApproxFunction& base = f.psi();
      if (base.family() == AF::tabulated) return std::nullopt;
      if (base.is_zero()) return 0.0;
      if (base.family() == psi.family()) return base.parameter() / c;
      // power-law F dominates log-corrected F by a factor log log
      return base.family() == AF::power_law ? inf : 0.0;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline LExponent L_exponent(const DimFunction& f, const ApproxFunction& psi,
                            const std::vector<double>& rho_grid = default_rho_grid()) {
  require(rho_grid.size() >= 32, "L_exponent grid needs at least 32 points");
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    require(rho_grid[i] > 0 && rho_grid[i] < 1, "grid points must lie in (0,1)");
    if (i > 0) require(rho_grid[i] < rho_grid[i - 1], "grid must decrease toward 0");
  }
  require(f.dims() == psi.dims(), "f and psi must share dimensions");
  if (psi.is_zero()) throw std::domain_error("F_psi vanishes");
  if (auto a = detail::analytic_L(f, psi)) return {*a, 0.0, true};

  std::vector<double> ratios;
  for (double rho : rho_grid) {
    const double F = psi.F_log(0.0, -psi.dims().alpha() * std::log(rho));
    if (F > 0) ratios.push_back(f.log_ratio_to_fstar(rho) / F);
  }
  if (ratios.empty()) throw std::domain_error("F_psi vanishes");
  // liminf over the finer half of the grid; spread as error bar
  const std::size_t start = ratios.size() / 2;
  const auto [lo, hi] = std::minmax_element(ratios.begin() + start, ratios.end());
  return {*lo, *hi - *lo, false};
}

enum class Verdict { Zero, Infinity, Unknown };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Zero: return "Zero";
    case Verdict::Infinity: return "Infinity";
    case Verdict::Unknown: return "Unknown";
  }
  return "?";
}

struct Classification {
  Verdict verdict = Verdict::Unknown;
  double L_value = 0.0;
  double L_error = 0.0;
  double eta_value = 0.0;
  bool analytic = false;
};

inline constexpr double kAnalyticUnknownTol = 1e-9;
inline constexpr double kNumericUnknownBars = 3.0;

inline Classification classify(const DimFunction& f, const ApproxFunction& psi, const Dimensions& dims,
                               const NormSpec& mu, const NormSpec& nv) {
  require(psi.dims() == dims && f.dims() == dims, "dimension mismatch");
  if (!psi.monotone_witness()) throw std::invalid_argument("psi has no monotonicity witness");
  if (!psi.decays_relative_to_dirichlet())
    throw std::domain_error("classification requires psi/psi_* -> 0");
  Classification c;
  c.eta_value = eta(dims, mu, nv);
  const LExponent L = L_exponent(f, psi);
  c.L_value = L.value;
  c.L_error = L.error;
  c.analytic = L.analytic;
  const double gap = L.value - c.eta_value;
  const double band = L.analytic ? kAnalyticUnknownTol * c.eta_value : kNumericUnknownBars * L.error;
  if (std::isfinite(gap) && std::abs(gap) <= band) c.verdict = Verdict::Unknown;
  else c.verdict = gap < 0 ? Verdict::Zero : Verdict::Infinity;
  return c;
}

// Jarnik-Besicovitch-Bovey-Dodson dimension of the c-approximable matrices.
// c = n/m gives the ambient dimension mn; c = inf gives (n-1)m.
inline double jbbd_dimension(const Dimensions& dims, double c) {
  require(!std::isnan(c), "c must be a number");
  require(c * dims.m >= dims.n, "jbbd_dimension needs c >= n/m");
  if (std::isinf(c)) return static_cast<double>((dims.n - 1) * dims.m);
  return (dims.n - 1) * dims.m + dims.d() / (1.0 + c);
}

}  // namespace badapprox
