#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "badapprox/approx.hpp"
#include "badapprox/row_density.hpp"

namespace badapprox {

// Matrices are m x n, row-major.
using Matrix = std::vector<double>;
using IntVec = std::vector<std::int64_t>;

// Delta_psi(p, q) = {A : |A q - p|_mu <= radius}, radius = psi(|q|_nu).
struct Slab {
  IntVec p;
  IntVec q;
  double radius = 0.0;
};

inline Slab make_slab(IntVec p, IntVec q, const ApproxFunction& psi, const NormSpec& nv) {
  require(std::any_of(q.begin(), q.end(), [](auto v) { return v != 0; }), "slab needs q != 0");
  const double r = psi(nv(q));
  return Slab{std::move(p), std::move(q), r};
}

inline std::vector<double> residual(const Matrix& A, const IntVec& p, const IntVec& q) {
  const std::size_t m = p.size(), n = q.size();
  std::vector<double> v(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = -static_cast<double>(p[i]);
    for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * static_cast<double>(q[j]);
    v[i] = s;
  }
  return v;
}

inline bool in_slab(const Matrix& A, const Slab& s, const NormSpec& mu) {
  return mu(residual(A, s.p, s.q)) <= s.radius;
}

// Exact Lebesgue measure of K ∩ slab for the sup norm: rows of A are
// independent, each contributing P(|<row, q> - p_i| <= radius / scale).
inline double slab_measure_exact(const Slab& s, const NormSpec& mu) {
  if (mu.kind != NormKind::sup) throw std::invalid_argument("exact measure requires sup norm");
  require(mu.dim == static_cast<int>(s.p.size()), "mu must act on R^m");
  const RowDensity rho(s.q);
  const double r = s.radius / mu.scale;
  double prod = 1.0;
  for (auto pi : s.p) prod *= rho.interval(pi - r, pi + r);
  return prod;
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t hits = 0;
};

inline McEstimate binomial_estimate(std::uint64_t hits, std::uint64_t samples) {
  McEstimate e;
  e.samples = samples;
  e.hits = hits;
  e.estimate = static_cast<double>(hits) / static_cast<double>(samples);
  e.stderr_ = std::sqrt(std::max(e.estimate * (1.0 - e.estimate), 0.0) / static_cast<double>(samples));
  return e;
}

inline void sample_matrix(std::mt19937_64& rng, Matrix& A) {
  for (auto& a : A) a = uniform01(rng);
}

inline McEstimate slab_measure_mc(const Slab& s, const NormSpec& mu, std::uint64_t samples, std::uint64_t seed) {
  require(samples >= 1000, "slab_measure_mc needs at least 1000 samples");
  std::mt19937_64 rng = shard_rng(seed, 0);
  Matrix A(s.p.size() * s.q.size());
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    sample_matrix(rng, A);
    hits += in_slab(A, s, mu);
  }
  return binomial_estimate(hits, samples);
}

inline constexpr double kEnumerationBudget = 1e8;

// Visits every q in Z^n with Q1 <= |q|_nu <= Q2.  With `half`, only the
// representative whose first nonzero coordinate is positive.
inline void for_each_q(const NormSpec& nv, double Q1, double Q2, bool half,
                       const std::function<void(const IntVec&, double)>& visit,
                       double budget = kEnumerationBudget) {
  require(Q1 <= Q2, "need Q1 <= Q2");
  const int n = nv.dim;
  const double bound = std::floor(Q2 / nv.sup_lower_factor());
  const double required = std::pow(2.0 * bound + 1.0, n);
  if (required > budget) throw BudgetError("q enumeration exceeds budget", required);
  const auto B = static_cast<std::int64_t>(bound);
  IntVec q(n, -B);
  if (B == 0) {
    if (Q1 <= 0) visit(q, 0.0);
    return;
  }
  while (true) {
    bool skip = false;
    if (half) {
      skip = true;
      for (auto v : q)
        if (v != 0) {
          skip = v < 0;
          break;
        }
      // the zero vector is its own representative
      if (std::all_of(q.begin(), q.end(), [](auto v) { return v == 0; })) skip = false;
    }
    if (!skip) {
      const double nq = nv(q);
      if (nq >= Q1 && nq <= Q2) visit(q, nq);
    }
    int i = n - 1;
    while (i >= 0 && q[i] == B) q[i--] = -B;
    if (i < 0) break;
    ++q[i];
  }
}

// Nearest integer to x, half-integers rounded down.
inline std::int64_t round_half_down(double x) { return static_cast<std::int64_t>(std::ceil(x - 0.5)); }

struct Hit {
  IntVec p;
  IntVec q;
  double residual = 0.0;  // |A q - p|_mu
  double radius = 0.0;    // psi(|q|_nu)
};

// All representatives (p, q) (first nonzero q coordinate positive) with
// Q1 <= |q|_nu <= Q2 and |A q - p|_mu <= psi(|q|_nu), p the nearest integer
// vector to A q.
inline std::vector<Hit> hit_list(const Matrix& A, const Dimensions& dims, const ApproxFunction& psi, double Q1,
                                 double Q2, const NormSpec& mu, const NormSpec& nv) {
  require(static_cast<int>(A.size()) == dims.D(), "A must be m x n");
  require(Q1 > 0, "need Q1 > 0");
  std::vector<Hit> out;
  IntVec p(dims.m);
  for_each_q(nv, Q1, Q2, true, [&](const IntVec& q, double nq) {
    for (int i = 0; i < dims.m; ++i) {
      double s = 0.0;
      for (int j = 0; j < dims.n; ++j) s += A[i * dims.n + j] * static_cast<double>(q[j]);
      p[i] = round_half_down(s);
    }
    const double res = mu(residual(A, p, q));
    const double r = psi(nq);
    if (res <= r) out.push_back({p, q, res, r});
  });
  return out;
}

// Dual norm of a functional b: sup_{|x|_nu <= 1} <b, x>.
inline double dual_norm(const NormSpec& nv, const std::vector<double>& b) {
  NormSpec d = nv;
  d.scale = 1.0 / nv.scale;
  switch (nv.kind) {
    case NormKind::sup: d.kind = NormKind::l1; d.p = 1.0; break;
    case NormKind::l1: d.kind = NormKind::sup; d.p = 0.0; break;
    case NormKind::l2: break;
    case NormKind::lp: d.p = nv.p / (nv.p - 1.0); break;
  }
  return d(b);
}

// A functional b with <b, q> = |q|_nu and dual norm 1.
inline std::vector<double> norming_functional(const NormSpec& nv, const IntVec& q) {
  const std::size_t n = q.size();
  std::vector<double> b(n, 0.0);
  const double nq = nv(q);
  require(nq > 0, "q must be nonzero");
  switch (nv.kind) {
    case NormKind::sup: {
      std::size_t j = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::abs(q[i]) > std::abs(q[j])) j = i;
      b[j] = (q[j] > 0 ? 1.0 : -1.0) * nv.scale;
      break;
    }
    case NormKind::l1:
      for (std::size_t i = 0; i < n; ++i) b[i] = (q[i] > 0 ? 1.0 : q[i] < 0 ? -1.0 : 0.0) * nv.scale;
      break;
    case NormKind::l2:
    case NormKind::lp: {
      const double p = nv.kind == NormKind::l2 ? 2.0 : nv.p;
      const double base = nq / nv.scale;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(q[i]);
        b[i] = (v < 0 ? -1.0 : 1.0) * std::pow(std::abs(v) / base, p - 1.0) * nv.scale;
      }
      break;
    }
  }
  return b;
}

// Operator norm of the m x n matrix E from (R^n, nu) to (R^m, mu).  Exact
// when mu is sup (max dual norm of rows) or nu is l1 (max mu-norm of columns).
inline double operator_norm(const Matrix& E, int m, int n, const NormSpec& mu, const NormSpec& nv) {
  if (mu.kind == NormKind::sup) {
    double best = 0.0;
    std::vector<double> row(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) row[j] = E[i * n + j];
      best = std::max(best, dual_norm(nv, row));
    }
    return mu.scale * best;
  }
  if (nv.kind == NormKind::l1) {
    double best = 0.0;
    std::vector<double> col(m);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) col[i] = E[i * n + j];
      best = std::max(best, mu(col));
    }
    return best / nv.scale;
  }
  throw std::invalid_argument("operator norm needs mu = sup or nu = l1");
}

// |K| = sup of the operator norm over the unit cube; attained at the all-ones matrix.
inline double cube_norm(const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
  return operator_norm(Matrix(dims.D(), 1.0), dims.m, dims.n, mu, nv);
}

struct ThicknessOptions {
  std::uint64_t samples = 10000;
  std::uint64_t seed = 1;
  double perturbation_scale = 1.0;  // > 1 deliberately exceeds the lemma's radius
};

struct ThicknessReport {
  bool holds = true;
  std::uint64_t tested = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max |Bq - p| - (psi1 + psi2)
};

// Samples A in the slab and B with |B - A| <= scale * psi2 / |q|_nu and checks
// B in the slab of radius psi1 + psi2.  Every fourth perturbation is the
// aligned rank-one matrix that pushes A q - p straight outward.
inline ThicknessReport thickness_report(const Slab& s, double psi2, const NormSpec& mu, const NormSpec& nv,
                                        const ThicknessOptions& opt = {}) {
  require(psi2 >= 0, "psi2 must be nonnegative");
  const int m = static_cast<int>(s.p.size()), n = static_cast<int>(s.q.size());
  const double nq = nv(s.q);
  const double step = opt.perturbation_scale * psi2 / nq;
  const std::vector<double> b = norming_functional(nv, s.q);
  double qq = 0.0;
  for (auto v : s.q) qq += static_cast<double>(v) * static_cast<double>(v);
  std::mt19937_64 rng = shard_rng(opt.seed, 0);
  std::normal_distribution<double> gauss;
  ThicknessReport rep;
  Matrix A(m * n), E(m * n);
  std::vector<double> v(m);
  for (std::uint64_t it = 0; it < opt.samples; ++it) {
    // residual v on the boundary or inside the mu-ball of radius psi1
    for (auto& x : v) x = gauss(rng);
    const double len = mu(v);
    const double shrink = (it % 2 == 0 || it % 4 == 3) ? 1.0 : uniform01(rng);
    for (auto& x : v) x *= s.radius * shrink / len;
    sample_matrix(rng, A);
    const auto r0 = residual(A, s.p, s.q);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) A[i * n + j] += (v[i] - r0[i]) * static_cast<double>(s.q[j]) / qq;
    if (it % 4 == 3) {
      const double vl = mu(v);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) E[i * n + j] = (vl > 0 ? v[i] / vl : (i == 0 ? 1.0 : 0.0)) * b[j];
      const double on = operator_norm(E, m, n, mu, nv);
      for (auto& e : E) e *= step / on;
    } else {
      for (auto& e : E) e = gauss(rng);
      const double on = operator_norm(E, m, n, mu, nv);
      const double t = step * uniform01(rng) / on;
      for (auto& e : E) e *= t;
    }
    for (int k = 0; k < m * n; ++k) E[k] += A[k];
    const double excess = mu(residual(E, s.p, s.q)) - (s.radius + psi2);
    rep.worst_excess = std::max(rep.worst_excess, excess);
    ++rep.tested;
    if (excess > 1e-12 * std::max(1.0, s.radius + psi2)) rep.holds = false;
  }
  return rep;
}

inline bool thickness_check(const Slab& s, double psi2, const NormSpec& mu, const NormSpec& nv,
                            const ThicknessOptions& opt = {}) {
  return thickness_report(s, psi2, mu, nv, opt).holds;
}

}  // namespace badapprox
