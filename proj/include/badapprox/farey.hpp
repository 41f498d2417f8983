#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

#include "badapprox/approx.hpp"

namespace badapprox {

// Fixed 512-bit integers; overflow throws instead of wrapping.
using Int512 = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<
    512, 512, boost::multiprecision::signed_magnitude, boost::multiprecision::checked, void>>;

inline constexpr int kMaxCellBits = 380;

struct Frac {
  Int512 p, q;
};

// Largest p/q <= num/den with q <= n, together with its right neighbour in
// the Farey sequence of order n.  Requires 0 <= num/den < 1.
inline std::pair<Frac, Frac> farey_floor(const Int512& num, const Int512& den, const Int512& n) {
  Frac a{0, 1}, b{1, 1};
  while (true) {
    // a <- a + t b, largest t keeping a <= x and q <= n
    const Int512 c1 = b.p * den - num * b.q;  // > 0 since b > x
    const Int512 r1 = num * a.q - a.p * den;  // >= 0
    Int512 t = r1 / c1;
    const Int512 tq = (n - a.q) / b.q;
    if (tq < t) {
      a.p += tq * b.p;
      a.q += tq * b.q;
      return {a, b};
    }
    a.p += t * b.p;
    a.q += t * b.q;
    if (r1 == t * c1) {
      // x = a exactly; the neighbour must be recomputed for the new a
      const Int512 k = (n - b.q) / a.q;
      b.p += k * a.p;
      b.q += k * a.q;
      return {a, b};
    }
    // b <- b + s a, largest s keeping b > x and q <= n
    const Int512 c2 = num * a.q - a.p * den;  // > 0
    const Int512 r2 = b.p * den - num * b.q;  // > 0
    const Int512 s = (r2 - 1) / c2;
    const Int512 sq = (n - b.q) / a.q;
    if (sq < s) {
      b.p += sq * a.p;
      b.q += sq * a.q;
      return {a, b};
    }
    b.p += s * a.p;
    b.q += s * a.q;
    if (s == 0 && t == 0) return {a, b};
  }
}

// Term after b in the Farey sequence of order n, given its predecessor a.
inline Frac farey_next(const Frac& a, const Frac& b, const Int512& n) {
  const Int512 k = (n + a.q) / b.q;
  return {k * b.p - a.p, k * b.q - a.q};
}

// Dyadic cell [X / 2^L, (X + 1) / 2^L] in [0, 1].
struct DyadicCell {
  Int512 X = 0;
  int L = 0;
};

enum class CellRelation { disjoint, meets, inside };

namespace detail {

// psi in |q|_nu units, radius compared in |.|_mu units: slab (p, q) is
// |q x - p| * unit_mu <= psi(c_nu q).
struct SlabScale {
  double c_nu = 1.0;
  double unit_mu = 1.0;
};

// Position of the cell relative to the slab (kp, kq) around p/q.
inline CellRelation classify_cell(const DyadicCell& cell, const Int512& p, const Int512& q, std::uint64_t k,
                                  const ApproxFunction& psi, const SlabScale& sc) {
  const double kq = static_cast<double>(k) * q.convert_to<double>();
  const double r = psi(sc.c_nu * kq) / sc.unit_mu;
  if (!(r > 0)) return CellRelation::disjoint;  // radius-0 slabs are empty in measure
  // distances scaled by 2^L q; slab radius r / (kq) scales to 2^L r / k
  const Int512 e1 = cell.X * q - (p << cell.L);
  const Int512 e2 = e1 + q;
  const double R = std::ldexp(r / static_cast<double>(k), cell.L);
  const double d1 = e1.convert_to<double>(), d2 = e2.convert_to<double>();
  const double far = std::max(std::abs(d1), std::abs(d2));
  if (far <= R * (1 - 1e-12)) return CellRelation::inside;
  const double near = (d1 <= 0 && d2 >= 0) ? 0.0 : std::min(std::abs(d1), std::abs(d2));
  return near <= R * (1 + 1e-12) ? CellRelation::meets : CellRelation::disjoint;
}

}  // namespace detail

// Does the cell meet any slab (p, q) with qlo <= q <= qhi (integers)?
// Works band by band, q in [2^j, 2^{j+1}): candidates are the Farey
// fractions of order 2^{j+1} within the largest radius of the band.
inline bool cell_meets_window(const DyadicCell& cell, const ApproxFunction& psi, std::uint64_t qlo,
                              std::uint64_t qhi, const detail::SlabScale& sc = {}) {
  require(cell.L <= kMaxCellBits, "cell too deep for exact arithmetic");
  if (qlo > qhi || psi.is_zero()) return false;
  qlo = std::max<std::uint64_t>(qlo, 1);
  const Int512 one = 1;
  const Int512 den = one << (cell.L + 64);
  for (int j = 63 - __builtin_clzll(qlo); j < 64; ++j) {
    const std::uint64_t band_lo = std::max<std::uint64_t>(std::uint64_t{1} << j, qlo);
    const std::uint64_t band_hi = j == 63 ? qhi : std::min<std::uint64_t>((std::uint64_t{1} << (j + 1)) - 1, qhi);
    if (band_lo > band_hi) break;
    // largest slab half-width in x over the band
    const double w = psi(sc.c_nu * static_cast<double>(band_lo)) / sc.unit_mu / static_cast<double>(band_lo);
    const Int512 W = Int512(std::ceil(std::ldexp(w, cell.L + 64))) + 1;
    Int512 lo = (cell.X << 64) - W;
    const Int512 hi = ((cell.X + 1) << 64) + W;
    if (lo < 0) lo = 0;
    if (lo >= den) lo = den - 1;
    const Int512 order = Int512(band_hi);
    auto [a, b] = farey_floor(lo, den, order);
    Frac cur = a, nxt = b;
    while (true) {
      const std::uint64_t q = cur.q.convert_to<std::uint64_t>();
      const std::uint64_t k = std::max<std::uint64_t>(1, (band_lo + q - 1) / q);
      if (k * q <= band_hi) {
        if (detail::classify_cell(cell, cur.p, cur.q, k, psi, sc) != CellRelation::disjoint) return true;
      }
      if (cur.p * den > hi * cur.q || cur.p == cur.q) break;
      const Frac after = farey_next(cur, nxt, order);
      cur = nxt;
      nxt = after;
    }
  }
  return false;
}

// Is the cell contained in a single slab (p, q) with qlo <= q <= qhi?  When
// q psi(q) < 1/2 on the window, such p/q is a convergent of the cell centre
// (Legendre), so only convergents and their first admissible multiple are tested.
inline bool cell_inside_window(const DyadicCell& cell, const ApproxFunction& psi, std::uint64_t qlo,
                               std::uint64_t qhi, const detail::SlabScale& sc = {}) {
  require(cell.L <= kMaxCellBits, "cell too deep for exact arithmetic");
  if (qlo > qhi || psi.is_zero()) return false;
  qlo = std::max<std::uint64_t>(qlo, 1);
  const double q0 = static_cast<double>(qlo);
  require(q0 * psi(sc.c_nu * q0) / sc.unit_mu < 0.5, "containment test needs q psi(q) < 1/2 on the window");
  // centre (2X + 1) / 2^{L+1}
  Int512 a = Int512(1) << (cell.L + 1), b = 2 * cell.X + 1;
  Int512 pm1 = 1, qm1 = 0, p = 0, q = 1;  // convergent -1 and 0 of x = [0; a_1, ...]
  auto test = [&](const Int512& pp, const Int512& qq) {
    const std::uint64_t qv = qq.convert_to<std::uint64_t>();
    const std::uint64_t k = std::max<std::uint64_t>(1, (qlo + qv - 1) / qv);
    if (k * qv > qhi) return false;
    return detail::classify_cell(cell, pp, qq, k, psi, sc) == CellRelation::inside;
  };
  if (test(p, q)) return true;
  while (b != 0) {
    const Int512 ak = a / b;
    const Int512 pn = ak * p + pm1, qn = ak * q + qm1;
    if (qn > Int512(qhi)) break;
    pm1 = p;
    qm1 = q;
    p = pn;
    q = qn;
    const Int512 r = a % b;
    a = b;
    b = r;
    if (test(p, q)) return true;
  }
  return false;
}

}  // namespace badapprox
