#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>

#include "badapprox/common.hpp"

namespace badapprox {

struct Dimensions {
  int m = 1;
  int n = 1;

  Dimensions() = default;
  Dimensions(int m_, int n_) : m(m_), n(n_) {
    require(m >= 1 && n >= 1, "dimensions must be positive");
  }
  int d() const { return m + n; }
  int D() const { return m * n; }
  double delta() const { return static_cast<double>(D()) / d(); }
  double alpha() const { return static_cast<double>(m) / d(); }
  bool operator==(const Dimensions&) const = default;
};

enum class NormKind { sup, l1, l2, lp };

// A norm on R^dim of the form x -> scale * |x|_p.  `scale` is the explicit
// rescaling toggle; the default keeps the user's norm unchanged.
struct NormSpec {
  NormKind kind = NormKind::sup;
  int dim = 1;
  double p = 0.0;
  double scale = 1.0;

  static NormSpec sup(int dim) { return make(NormKind::sup, dim, 0.0); }
  static NormSpec l1(int dim) { return make(NormKind::l1, dim, 1.0); }
  static NormSpec l2(int dim) { return make(NormKind::l2, dim, 2.0); }
  static NormSpec lp(int dim, double p) {
    require(p >= 1.0, "lp norm needs p >= 1");
    if (p == 1.0) return l1(dim);
    if (p == 2.0) return l2(dim);
    if (std::isinf(p)) return sup(dim);
    return make(NormKind::lp, dim, p);
  }

  NormSpec rescaled(double s) const {
    require(s > 0 && std::isfinite(s), "norm scale must be positive");
    NormSpec r = *this;
    r.scale *= s;
    return r;
  }

  // The exponent p, +inf for the sup norm.
  double exponent() const {
    return kind == NormKind::sup ? std::numeric_limits<double>::infinity() : p;
  }

  template <class Vec>
  double operator()(const Vec& x) const {
    double acc = 0.0;
    const auto len = static_cast<int>(x.size());
    switch (kind) {
      case NormKind::sup:
        for (int i = 0; i < len; ++i) acc = std::max(acc, std::abs(static_cast<double>(x[i])));
        return scale * acc;
      case NormKind::l1:
        for (int i = 0; i < len; ++i) acc += std::abs(static_cast<double>(x[i]));
        return scale * acc;
      case NormKind::l2:
        for (int i = 0; i < len; ++i) acc = std::hypot(acc, static_cast<double>(x[i]));
        return scale * acc;
      case NormKind::lp: {
        double mx = 0.0;
        for (int i = 0; i < len; ++i) mx = std::max(mx, std::abs(static_cast<double>(x[i])));
        if (mx == 0.0) return 0.0;
        for (int i = 0; i < len; ++i) acc += std::pow(std::abs(static_cast<double>(x[i])) / mx, p);
        return scale * mx * std::pow(acc, 1.0 / p);
      }
    }
    return 0.0;
  }

  // Smallest c with |x|_2 <= c * norm(x).
  double euclid_factor() const {
    double c = 1.0;
    if (kind == NormKind::sup) c = std::sqrt(static_cast<double>(dim));
    else if (kind == NormKind::lp && p > 2.0) c = std::pow(static_cast<double>(dim), 0.5 - 1.0 / p);
    return c / scale;
  }

  // Largest lower bound c with norm(x) >= c * |x|_inf.
  double sup_lower_factor() const { return scale; }

  std::string name() const {
    std::string s;
    switch (kind) {
      case NormKind::sup: s = "sup"; break;
      case NormKind::l1: s = "l1"; break;
      case NormKind::l2: s = "l2"; break;
      case NormKind::lp: s = "lp:" + std::to_string(p); break;
    }
    if (scale != 1.0) s += "*" + std::to_string(scale);
    return s;
  }

  // Accepts "sup", "l1", "l2", "lp:<p>".
  static NormSpec parse(const std::string& text, int dim) {
    if (text == "sup" || text == "linf") return sup(dim);
    if (text == "l1") return l1(dim);
    if (text == "l2") return l2(dim);
    if (text.rfind("lp:", 0) == 0) return lp(dim, std::stod(text.substr(3)));
    throw std::invalid_argument("unknown norm '" + text + "'");
  }

  bool operator==(const NormSpec&) const = default;

 private:
  static NormSpec make(NormKind k, int dim, double p) {
    require(dim >= 1, "norm dimension must be positive");
    NormSpec s;
    s.kind = k;
    s.dim = dim;
    s.p = p;
    return s;
  }
};

inline double unit_ball_volume(const NormSpec& norm) {
  if (norm.dim < 1 || !(norm.scale > 0) || !std::isfinite(norm.scale))
    throw std::domain_error("norm volume unavailable");
  const double k = norm.dim;
  double base = 0.0;
  switch (norm.kind) {
    case NormKind::sup: base = std::ldexp(1.0, norm.dim); break;
    case NormKind::l1: base = std::ldexp(1.0, norm.dim) / std::tgamma(k + 1.0); break;
    case NormKind::l2: base = std::pow(std::numbers::pi, k / 2.0) / std::tgamma(k / 2.0 + 1.0); break;
    case NormKind::lp:
      if (!(norm.p >= 1.0) || !std::isfinite(norm.p)) throw std::domain_error("norm volume unavailable");
      base = std::exp(k * std::log(2.0) + k * std::lgamma(1.0 + 1.0 / norm.p) - std::lgamma(1.0 + k / norm.p));
      break;
  }
  return base / std::pow(norm.scale, k);
}

// Riemann zeta for real s > 1 via Euler-Maclaurin with 20 explicit terms.
inline double zeta(double s) {
  if (!(s > 1.0)) throw std::domain_error("zeta needs s > 1");
  constexpr int N = 20;
  // B_{2j} / (2j)!
  constexpr double b[] = {1.0 / 12.0,         -1.0 / 720.0,        1.0 / 30240.0,
                          -1.0 / 1209600.0,   1.0 / 47900160.0,    -691.0 / 1307674368000.0,
                          1.0 / 74724249600.0};
  long double sum = 0.0L;
  for (int k = N - 1; k >= 1; --k) sum += std::pow(static_cast<long double>(k), -static_cast<long double>(s));
  const long double Nn = N;
  sum += std::pow(Nn, 1.0L - s) / (s - 1.0L) + 0.5L * std::pow(Nn, -static_cast<long double>(s));
  // Rising factorial s(s+1)...(s+2j-2) times N^{-s-2j+1}.
  long double rising = s;
  long double power = std::pow(Nn, -static_cast<long double>(s) - 1.0L);
  for (int j = 0; j < 7; ++j) {
    sum += b[j] * rising * power;
    rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
    power /= Nn * Nn;
  }
  return static_cast<double>(sum);
}

}  // namespace badapprox
