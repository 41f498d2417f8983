#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "badapprox/norms.hpp"

namespace badapprox {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kMaxLatticeDim = 8;
inline constexpr double kEnumerationNodeBudget = 2e8;

// A norm on R^d: either a single NormSpec or the mixed norm
// |(p, q)| = max(|p|_mu, |q|_nu) with p in R^m, q in R^n.
class LatticeNorm {
 public:
  static LatticeNorm plain(const NormSpec& s) {
    LatticeNorm n;
    n.a_ = s;
    n.d_ = s.dim;
    return n;
  }
  static LatticeNorm mixed(const Dimensions& dims, const NormSpec& mu, const NormSpec& nv) {
    require(mu.dim == dims.m && nv.dim == dims.n, "norm dimensions must match (m, n)");
    LatticeNorm n;
    n.mixed_ = true;
    n.a_ = mu;
    n.b_ = nv;
    n.m_ = dims.m;
    n.d_ = dims.d();
    return n;
  }

  int dim() const { return d_; }
  bool is_mixed() const { return mixed_; }

  double operator()(const Vec& v) const {
    if (!mixed_) return a_(v);
    return std::max(a_(v.head(m_)), b_(v.tail(d_ - m_)));
  }

  // |v|_2 <= euclid_factor() * |v|
  double euclid_factor() const {
    if (!mixed_) return a_.euclid_factor();
    return std::hypot(a_.euclid_factor(), b_.euclid_factor());
  }

  double ball_volume() const {
    return mixed_ ? unit_ball_volume(a_) * unit_ball_volume(b_) : unit_ball_volume(a_);
  }

 private:
  bool mixed_ = false;
  NormSpec a_, b_;
  int m_ = 0;
  int d_ = 0;
};

// Unimodular lattice; basis vectors are the columns.
class Lattice {
 public:
  explicit Lattice(Mat basis, double tol = 1e-9) : basis_(std::move(basis)) {
    require(basis_.rows() == basis_.cols() && basis_.rows() >= 1, "basis must be square");
    require(std::abs(std::abs(basis_.determinant()) - 1.0) <= tol, "lattice must be unimodular");
  }
  static Lattice standard(int d) { return Lattice(Mat::Identity(d, d)); }

  int dim() const { return static_cast<int>(basis_.rows()); }
  const Mat& basis() const { return basis_; }
  double covolume() const { return std::abs(basis_.determinant()); }
  Vec point(const IVec& z) const { return basis_ * z.cast<double>(); }

 private:
  Mat basis_;
};

inline Lattice dual(const Lattice& L) { return Lattice(L.basis().inverse().transpose()); }

// sqrt(det(S^T S)) for the lattice spanned by the columns of S.
inline double sublattice_covolume(const Mat& S) { return std::sqrt(std::abs((S.transpose() * S).determinant())); }

struct ReducedBasis {
  Mat basis;  // = input * U
  IMat U;     // unimodular
};

// LLL reduction (delta = 0.99) of the columns of B (d x k, rank k).
inline ReducedBasis lll_reduce(const Mat& B, double delta = 0.99) {
  const int k = static_cast<int>(B.cols());
  ReducedBasis r{B, IMat::Identity(k, k)};
  Mat& b = r.basis;
  auto gram_schmidt = [&](Mat& bstar, Mat& mu, Vec& norms) {
    bstar = b;
    mu = Mat::Zero(k, k);
    norms = Vec::Zero(k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < i; ++j) {
        mu(i, j) = b.col(i).dot(bstar.col(j)) / norms(j);
        bstar.col(i) -= mu(i, j) * bstar.col(j);
      }
      norms(i) = bstar.col(i).squaredNorm();
    }
  };
  Mat bstar, mu;
  Vec norms;
  gram_schmidt(bstar, mu, norms);
  int i = 1;
  int guard = 0;
  while (i < k) {
    if (++guard > 100000) throw std::runtime_error("LLL did not converge");
    for (int j = i - 1; j >= 0; --j) {
      const double c = std::round(mu(i, j));
      if (c != 0.0) {
        b.col(i) -= c * b.col(j);
        r.U.col(i) -= static_cast<std::int64_t>(c) * r.U.col(j);
        for (int l = 0; l <= j; ++l) mu(i, l) -= c * (l == j ? 1.0 : mu(j, l));
      }
    }
    if (norms(i) >= (delta - mu(i, i - 1) * mu(i, i - 1)) * norms(i - 1)) {
      ++i;
    } else {
      b.col(i).swap(b.col(i - 1));
      r.U.col(i).swap(r.U.col(i - 1));
      gram_schmidt(bstar, mu, norms);
      i = std::max(i - 1, 1);
    }
  }
  return r;
}

// Fincke-Pohst enumeration of all nonzero v = B z with |v|_2^2 <= R2.
// `visit(v, z)` receives z as coordinates with respect to the columns of B.
template <class Visit>
void enumerate_short_vectors(const Mat& B, double R2, Visit&& visit, double node_budget = kEnumerationNodeBudget) {
  const int k = static_cast<int>(B.cols());
  const ReducedBasis red = lll_reduce(B);
  const Mat& b = red.basis;
  Mat mu = Mat::Zero(k, k);
  Vec norms(k);
  Mat bstar = b;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < i; ++j) {
      mu(i, j) = b.col(i).dot(bstar.col(j)) / bstar.col(j).squaredNorm();
      bstar.col(i) -= mu(i, j) * bstar.col(j);
    }
    norms(i) = bstar.col(i).squaredNorm();
  }
  std::vector<double> x(k, 0.0);
  double nodes = 0;
  const double slack = 1e-12 * std::max(1.0, R2);
  IVec zx(k);
  // depth-first over x_{k-1}, ..., x_0; each level ranges over an interval
  // around its projected center
  auto rec = [&](auto&& self, int i, double partial) -> void {
    double c = 0.0;
    for (int j = i + 1; j < k; ++j) c -= mu(j, i) * x[j];
    const double rem = R2 + slack - partial;
    if (rem < 0) return;
    const double w = std::sqrt(rem / norms(i));
    const double lo = std::ceil(c - w), hi = std::floor(c + w);
    for (double xi = lo; xi <= hi; xi += 1.0) {
      if (++nodes > node_budget) throw BudgetError("lattice enumeration exceeds node budget", nodes);
      x[i] = xi;
      const double len = partial + (xi - c) * (xi - c) * norms(i);
      if (len > R2 + slack) continue;
      if (i > 0) {
        self(self, i - 1, len);
        continue;
      }
      bool nonzero = false;
      for (int j = 0; j < k; ++j) nonzero |= x[j] != 0.0;
      if (!nonzero) continue;
      for (int j = 0; j < k; ++j) zx(j) = static_cast<std::int64_t>(x[j]);
      visit(static_cast<Vec>(b * zx.cast<double>()), static_cast<IVec>(red.U * zx));
    }
    x[i] = 0.0;
  };
  rec(rec, k - 1, 0.0);
}

struct ShortestVector {
  Vec vector;
  IVec coeffs;
  double length = 0.0;
};

// Minimal nonzero norm among v = B z (B is d x k of rank k).
inline ShortestVector shortest_in_span(const Mat& B, const LatticeNorm& norm) {
  const ReducedBasis red = lll_reduce(B);
  ShortestVector best;
  best.length = std::numeric_limits<double>::infinity();
  for (int i = 0; i < red.basis.cols(); ++i) {
    const double l = norm(red.basis.col(i));
    if (l < best.length) {
      best.length = l;
      best.vector = red.basis.col(i);
      best.coeffs = red.U.col(i);
    }
  }
  const double c = norm.euclid_factor();
  enumerate_short_vectors(B, c * c * best.length * best.length, [&](const Vec& v, const IVec& z) {
    const double l = norm(v);
    if (l < best.length) {
      best.length = l;
      best.vector = v;
      best.coeffs = z;
    }
  });
  return best;
}

inline ShortestVector shortest_vector(const Lattice& L, const LatticeNorm& norm) {
  require(L.dim() <= kMaxLatticeDim, "lattice dimension too large for enumeration");
  require(norm.dim() == L.dim(), "norm dimension must match lattice");
  return shortest_in_span(L.basis(), norm);
}

// lambda_1, ..., lambda_d with realizing vectors (greedy independent selection).
struct SuccessiveMinima {
  std::vector<double> lambda;
  std::vector<Vec> vectors;
};

inline SuccessiveMinima successive_minima(const Lattice& L, const LatticeNorm& norm) {
  require(L.dim() <= kMaxLatticeDim, "lattice dimension too large for enumeration");
  const int d = L.dim();
  const ReducedBasis red = lll_reduce(L.basis());
  double radius = 0.0;  // lambda_d <= max norm of any basis
  for (int i = 0; i < d; ++i) radius = std::max(radius, norm(red.basis.col(i)));
  std::vector<std::pair<double, Vec>> cand;
  const double c = norm.euclid_factor();
  enumerate_short_vectors(L.basis(), c * c * radius * radius, [&](const Vec& v, const IVec&) {
    const double l = norm(v);
    if (l <= radius * (1 + 1e-12)) cand.emplace_back(l, v);
  });
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SuccessiveMinima out;
  Mat chosen(d, 0);
  for (const auto& [l, v] : cand) {
    Mat trial(d, chosen.cols() + 1);
    trial << chosen, v;
    Eigen::FullPivLU<Mat> lu(trial);
    lu.setThreshold(1e-10);
    if (lu.rank() == trial.cols()) {
      chosen = trial;
      out.lambda.push_back(l);
      out.vectors.push_back(v);
      if (chosen.cols() == d) break;
    }
  }
  return out;
}

// Upper bound for the covering radius sup_x dist(x, L): half the sum of the minima.
inline double codiameter_upper(const Lattice& L, const LatticeNorm& norm) {
  const auto sm = successive_minima(L, norm);
  return 0.5 * std::accumulate(sm.lambda.begin(), sm.lambda.end(), 0.0);
}

// lambda_1^d <= 2^d / V (Minkowski) for a unimodular lattice.
inline double minkowski_bound(const LatticeNorm& norm) {
  return std::pow(2.0, norm.dim()) / norm.ball_volume();
}

namespace detail {

inline std::int64_t ext_gcd(std::int64_t a, std::int64_t b, std::int64_t& x, std::int64_t& y) {
  std::int64_t x0 = 1, y0 = 0, x1 = 0, y1 = 1;
  while (b != 0) {
    const std::int64_t t = a / b;
    std::int64_t r = a - t * b;
    a = b;
    b = r;
    r = x0 - t * x1;
    x0 = x1;
    x1 = r;
    r = y0 - t * y1;
    y0 = y1;
    y1 = r;
  }
  if (a < 0) {
    a = -a;
    x0 = -x0;
    y0 = -y0;
  }
  x = x0;
  y = y0;
  return a;
}

}  // namespace detail

// Unimodular V with z^T V = (g, 0, ..., 0); columns 1..d-1 of V span the
// integer vectors orthogonal to z.
inline IMat integer_kernel(const IVec& z) {
  const int d = static_cast<int>(z.size());
  require(z.cwiseAbs().maxCoeff() > 0, "kernel of the zero vector");
  IMat V = IMat::Identity(d, d);
  IVec a = z;
  // bring a nonzero entry to position 0
  for (int j = 0; j < d; ++j)
    if (a(j) != 0) {
      V.col(0).swap(V.col(j));
      std::swap(a(0), a(j));
      break;
    }
  for (int j = 1; j < d; ++j) {
    if (a(j) == 0) continue;
    std::int64_t x, y;
    const std::int64_t g = detail::ext_gcd(a(0), a(j), x, y);
    const IVec c0 = V.col(0), cj = V.col(j);
    V.col(0) = x * c0 + y * cj;
    V.col(j) = (-a(j) / g) * c0 + (a(0) / g) * cj;
    a(0) = g;
    a(j) = 0;
  }
  return V.rightCols(d - 1);
}

// Irr(r) = |r| / lambda_1(L* ∩ r^perp)^{d-1} for r = B z.
inline double irregularity(const Lattice& L, const IVec& z, const LatticeNorm& norm) {
  require(L.dim() <= kMaxLatticeDim, "lattice dimension too large for enumeration");
  require(z.size() == L.dim(), "coefficient vector has wrong size");
  require(z.cwiseAbs().maxCoeff() > 0, "irregularity of the zero vector");
  const int d = L.dim();
  const Vec r = L.point(z);
  if (d == 1) return norm(r);
  const Mat S = L.basis().inverse().transpose() * integer_kernel(z).cast<double>();
  const double l1 = shortest_in_span(S, norm).length;
  return norm(r) / std::pow(l1, d - 1);
}

// Irr(L) = lambda_1(L)^{-(2d-1)}
inline double lattice_irregularity(const Lattice& L, const LatticeNorm& norm) {
  const double l1 = shortest_vector(L, norm).length;
  return std::pow(l1, -(2.0 * L.dim() - 1.0));
}

// For each K: #{r in L : Irr(r) >= K, |r| <= Q} / Q^d.
inline std::vector<double> epsilon_K_profile(const Lattice& L, const std::vector<double>& Ks, double Q,
                                             const LatticeNorm& norm, double node_budget = kEnumerationNodeBudget) {
  require(L.dim() <= kMaxLatticeDim, "lattice dimension too large for enumeration");
  const double irrL = lattice_irregularity(L, norm);
  for (double K : Ks) {
    require(K >= 1.0, "K must be at least 1");
    require(Q >= K * irrL, "epsilon_K_scan needs Q >= K Irr(L)");
  }
  std::vector<std::uint64_t> counts(Ks.size(), 0);
  const double c = norm.euclid_factor();
  enumerate_short_vectors(
      L.basis(), c * c * Q * Q,
      [&](const Vec& v, const IVec& z) {
        // r and -r have equal irregularity; count the half with first nonzero z positive twice
        for (int j = 0; j < z.size(); ++j)
          if (z(j) != 0) {
            if (z(j) < 0) return;
            break;
          }
        if (norm(v) > Q) return;
        const double irr = irregularity(L, z, norm);
        for (std::size_t i = 0; i < Ks.size(); ++i)
          if (irr >= Ks[i]) counts[i] += 2;
      },
      node_budget);
  std::vector<double> out(Ks.size());
  const double vol = std::pow(Q, L.dim());
  for (std::size_t i = 0; i < Ks.size(); ++i) out[i] = static_cast<double>(counts[i]) / vol;
  return out;
}

inline double epsilon_K_scan(const Lattice& L, double K, double Q, const LatticeNorm& norm) {
  return epsilon_K_profile(L, {K}, Q, norm).front();
}

}  // namespace badapprox
