#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "badapprox/geometry.hpp"
#include "badapprox/lattice.hpp"
#include "badapprox/scheduler.hpp"

namespace badapprox {

// u_A = [I_m, -A; 0, I_n], A an m x n row-major matrix.
inline Mat make_u(const Matrix& A, const Dimensions& dims) {
  require(static_cast<int>(A.size()) == dims.D(), "A must be m x n");
  Mat u = Mat::Identity(dims.d(), dims.d());
  for (int i = 0; i < dims.m; ++i)
    for (int j = 0; j < dims.n; ++j) u(i, dims.m + j) = -A[i * dims.n + j];
  return u;
}

// g_t = diag(e^{t/m} I_m, e^{-t/n} I_n)
inline Mat make_g(double t, const Dimensions& dims) {
  Mat g = Mat::Zero(dims.d(), dims.d());
  for (int i = 0; i < dims.m; ++i) g(i, i) = std::exp(t / dims.m);
  for (int j = 0; j < dims.n; ++j) g(dims.m + j, dims.m + j) = std::exp(-t / dims.n);
  return g;
}

inline Lattice flow_lattice(const Matrix& A, double t, const Dimensions& dims) {
  return Lattice(make_g(t, dims) * make_u(A, dims));
}

// -log lambda_1 under the mixed norm max(|p|_mu, |q|_nu)
inline double delta_fn(const Lattice& L, const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
  require(L.dim() == dims.d(), "lattice dimension must be m + n");
  return -std::log(shortest_vector(L, LatticeNorm::mixed(dims, mu, nv)).length);
}

struct FlowPoint {
  double t = 0.0;
  Matrix A;
  Lattice lattice = Lattice::standard(2);
  double delta = 0.0;
};

inline FlowPoint flow_point(const Matrix& A, double t, const Dimensions& dims, const NormSpec& mu,
                            const NormSpec& nv) {
  FlowPoint f{t, A, flow_lattice(A, t, dims), 0.0};
  f.delta = delta_fn(f.lattice, dims, mu, nv);
  return f;
}

namespace detail {

// h(r) = log psi(e^{t/n - r}) + t/m + r, strictly increasing in r.
inline double rpsi_residual(const ApproxFunction& psi, double t, double r) {
  const Dimensions& d = psi.dims();
  return psi.log_psi_at(t / d.n - r) + t / d.m + r;
}

// The root lies in [-t/m, t/n] (both sides of the equation at most 1, |q| >= 1).
inline bool rpsi_solvable(const ApproxFunction& psi, double t) {
  const Dimensions& d = psi.dims();
  return rpsi_residual(psi, t, -t / d.m) <= 0.0 && rpsi_residual(psi, t, t / d.n) >= 0.0;
}

}  // namespace detail

// Start of the domain of r_psi: both solvability conditions are monotone in t,
// so the first t is found by bisection.
inline double r_psi_domain_start(const ApproxFunction& psi) {
  if (psi.is_zero()) throw std::domain_error("r_psi undefined for psi = 0");
  double hi = 1.0;
  while (!detail::rpsi_solvable(psi, hi)) {
    hi *= 2.0;
    if (hi > 1e6) throw std::domain_error("r_psi has no domain below t = 1e6");
  }
  double lo = 0.0;
  if (detail::rpsi_solvable(psi, lo)) return 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::rpsi_solvable(psi, mid) ? hi : lo) = mid;
  }
  return hi;
}

// Unique r with psi(e^{t/n - r}) = e^{-t/m - r}.
inline double r_psi_solve(const ApproxFunction& psi, double t) {
  require(psi.monotone_witness(), "psi must be nonincreasing");
  if (psi.is_zero()) throw std::domain_error("r_psi undefined for psi = 0");
  if (!detail::rpsi_solvable(psi, t)) throw std::domain_error("t lies below the domain of r_psi");
  const Dimensions& d = psi.dims();
  double lo = -t / d.m, hi = t / d.n;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (detail::rpsi_residual(psi, t, mid) >= 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

struct DaniRow {
  double t = 0.0;
  double delta = 0.0;
  double r = 0.0;
  double Q_t = 0.0;       // e^{t/n - r}
  bool excursion = false; // delta >= r
  bool hit = false;       // some q with 1 <= |q| <= Q_t and |Aq - p| <= psi(|q|)
};

struct DaniReport {
  std::vector<DaniRow> rows;
  double agreement = 0.0;           // fraction of rows with excursion == hit
  std::size_t violations = 0;       // excursion without a hit (impossible for q != 0 minimizers)
  double horizon = 0.0;             // largest t checked
};

// Finite-horizon comparison of excursions of g_t u_A Z^d above r_psi(t)
// with hits in the scale band [1, Q_t].  An excursion forces a hit; the
// converse only holds at some nearby time, so disagreements are expected.
inline DaniReport dani_check(const Matrix& A, const ApproxFunction& psi, const std::vector<double>& t_grid,
                             const NormSpec& mu, const NormSpec& nv) {
  const Dimensions& dims = psi.dims();
  require(dims.d() <= kMaxLatticeDim, "d must be at most 8");
  require(!t_grid.empty(), "t grid must be nonempty");
  DaniReport rep;
  std::size_t agree = 0;
  for (double t : t_grid) {
    DaniRow row;
    row.t = t;
    row.r = r_psi_solve(psi, t);
    row.delta = delta_fn(flow_lattice(A, t, dims), dims, mu, nv);
    row.excursion = row.delta >= row.r;
    row.Q_t = std::exp(t / dims.n - row.r);
    row.hit = row.Q_t >= 1.0 && !hit_list(A, dims, psi, 1.0, row.Q_t, mu, nv).empty();
    agree += row.excursion == row.hit;
    rep.violations += row.excursion && !row.hit;
    rep.horizon = std::max(rep.horizon, t);
    rep.rows.push_back(row);
  }
  rep.agreement = static_cast<double>(agree) / static_cast<double>(t_grid.size());
  return rep;
}

// A word: one letter per level, each letter an m x n digit matrix with
// entries in [0, N_k).
using Word = std::vector<IntVec>;

// pi(omega) = sum_k omega_k / N^k
inline Matrix encode_word(const Schedule& s, const Word& omega, const Dimensions& dims) {
  require(omega.size() <= s.size(), "word longer than the schedule");
  Matrix A(dims.D(), 0.0);
  double log2_scale = 0.0;
  for (std::size_t k = 0; k < omega.size(); ++k) {
    const std::int64_t l = s.exponent(k + 1);
    log2_scale += static_cast<double>(l);
    require(static_cast<int>(omega[k].size()) == dims.D(), "letter must have m*n digits");
    for (int i = 0; i < dims.D(); ++i) {
      const std::int64_t digit = omega[k][i];
      require(digit >= 0 && (l >= 63 || digit < (std::int64_t{1} << l)), "digit out of range");
      A[i] += std::ldexp(static_cast<double>(digit), -static_cast<int>(log2_scale));
    }
  }
  return A;
}

// Lambda_omega = g_{delta log N^k} u_{pi(omega)} Z^d with k = |omega|
inline Lattice cylinder_lattice(const Schedule& s, const Word& omega, const Dimensions& dims) {
  require(omega.size() <= s.size(), "word index out of range");
  const double t = dims.delta() * s.log_N_prod(omega.size());
  return flow_lattice(encode_word(s, omega, dims), t, dims);
}

}  // namespace badapprox
