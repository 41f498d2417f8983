#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "badapprox/core.hpp"
#include "badapprox/dynamics.hpp"
#include "badapprox/farey.hpp"
#include "badapprox/scheduler.hpp"

namespace badapprox {

// Cantor series coding: level k letters are m x n digit matrices in [0, N_k)
// with N_k = 2^{l_k} taken from the schedule.
struct CodingScheme {
  Schedule schedule;
  Dimensions dims;

  int D() const { return dims.D(); }
  std::size_t depth() const { return schedule.size(); }
  std::int64_t log2_N(std::size_t k) const { return schedule.exponent(k); }
  // log2 N^k
  std::int64_t log2_N_prod(std::size_t k) const { return schedule.log2_prod.at(k); }
};

// Schedule with a fixed N_k = 2^l, for trees that do not come from psi.
inline CodingScheme uniform_scheme(const Dimensions& dims, std::int64_t l, std::size_t depth) {
  require(l >= 1 && l <= 62, "log2 N must lie in [1, 62]");
  Schedule s{ApproxFunction::power_law(dims, 1.0), 1.0, dims.alpha(), {}, {0}};
  for (std::size_t k = 0; k < depth; ++k) detail::append_block(s, l);
  return CodingScheme{s, dims};
}

inline Matrix encode(const CodingScheme& cs, const Word& omega) { return encode_word(cs.schedule, omega, cs.dims); }

// Unique k with 1/N^{k+1} < rho <= 1/N^k.
inline std::size_t k_of_rho(const CodingScheme& cs, double rho) {
  require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
  const double v = -std::log2(rho);
  std::size_t k = 0;
  while (true) {
    if (k + 1 > cs.depth()) throw std::out_of_range("rho below the resolution of the schedule");
    if (v < static_cast<double>(cs.log2_N_prod(k + 1))) return k;
    ++k;
  }
}

struct TreeNode {
  std::int64_t parent = -1;
  IntVec letter;            // digits of the last letter (empty for the root)
  Matrix corner;            // pi(omega)
  DyadicCell cell;          // exact corner for D = 1
  std::uint64_t tested = 0; // children examined (all, or a sample)
  std::uint64_t kept = 0;   // of those, children kept
  double mass = 0.0;        // natural measure: split evenly over expanded children
  std::uint64_t expanded = 0;
};

struct Tree {
  CodingScheme scheme;
  std::vector<std::vector<TreeNode>> levels;  // levels[k] holds T^k
  std::vector<double> P_plus, P_minus;        // index k-1 for level k
  bool sampled = false;    // some level examined a sample of children
  bool truncated = false;  // node budget reached
  bool died = false;       // some level lost all nodes
  std::string variant;

  std::size_t depth() const { return P_plus.size(); }
  double letters(std::size_t k) const { return std::ldexp(1.0, static_cast<int>(scheme.log2_N(k) * scheme.D())); }
  double M_minus(std::size_t k) const { return letters(k) * (1 - P_plus.at(k - 1)); }
  double M_plus(std::size_t k) const { return letters(k) * (1 - P_minus.at(k - 1)); }
  double log_M_minus_prod(std::size_t k) const {
    double s = 0;
    for (std::size_t j = 1; j <= k; ++j) s += std::log(M_minus(j));
    return s;
  }
  double log_M_plus_prod(std::size_t k) const {
    double s = 0;
    for (std::size_t j = 1; j <= k; ++j) s += std::log(M_plus(j));
    return s;
  }
  double sup_P_plus() const { return P_plus.empty() ? 0.0 : *std::max_element(P_plus.begin(), P_plus.end()); }

  // log f_+(rho) = D log(N^k rho) - log M_-^k, log f_-(rho) = D log(N^k rho) - log M_+^k
  double log_f_plus(double rho) const {
    const std::size_t k = k_of_rho(scheme, rho);
    return scheme.D() * (static_cast<double>(scheme.log2_N_prod(k)) * kLn2 + std::log(rho)) - log_M_minus_prod(k);
  }
  double log_f_minus(double rho) const {
    const std::size_t k = k_of_rho(scheme, rho);
    return scheme.D() * (static_cast<double>(scheme.log2_N_prod(k)) * kLn2 + std::log(rho)) - log_M_plus_prod(k);
  }

  Word word(std::size_t level, std::size_t index) const {
    Word w(level);
    std::int64_t i = static_cast<std::int64_t>(index);
    for (std::size_t k = level; k > 0; --k) {
      w[k - 1] = levels[k][i].letter;
      i = levels[k][i].parent;
    }
    return w;
  }
};

struct TreeOptions {
  std::uint64_t full_enumeration_limit = 1u << 16;  // children per node examined exhaustively
  std::uint64_t child_sample = 4096;                // otherwise this many sampled children
  std::uint64_t expand_per_node = 0;                // 0: every kept child becomes a node
  std::uint64_t node_budget = 10000000;
  std::uint64_t seed = 1;
};

struct ChildCell {
  Matrix corner;
  double side = 1.0;
  DyadicCell cell;
};

// keep(level of the child, letter, child cell)
using ChildRule = std::function<bool(std::size_t, const IntVec&, const ChildCell&)>;

inline Tree build_tree(const CodingScheme& cs, std::size_t depth, const ChildRule& keep,
                       const TreeOptions& opt = {}) {
  require(depth <= cs.depth(), "depth exceeds the schedule");
  const int D = cs.D();
  Tree t;
  t.scheme = cs;
  TreeNode root;
  root.corner = Matrix(D, 0.0);
  root.mass = 1.0;
  t.levels.push_back({root});
  std::uint64_t nodes = 1;
  for (std::size_t k = 0; k < depth; ++k) {
    const std::int64_t l = cs.log2_N(k + 1);
    const double side = std::ldexp(1.0, -static_cast<int>(cs.log2_N_prod(k + 1)));
    const bool exhaustive = static_cast<double>(l) * D <= std::log2(static_cast<double>(opt.full_enumeration_limit));
    const std::uint64_t letters = exhaustive ? (std::uint64_t{1} << (l * D)) : opt.child_sample;
    const std::uint64_t mask = l >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << l) - 1;
    if (!exhaustive) t.sampled = true;
    std::vector<TreeNode> next;
    double pmax = 0.0, pmin = 1.0;
    IntVec letter(D);
    for (std::size_t idx = 0; idx < t.levels[k].size(); ++idx) {
      TreeNode& node = t.levels[k][idx];
      std::mt19937_64 rng = shard_rng(opt.seed, (static_cast<std::uint64_t>(k) << 40) ^ idx);
      std::vector<std::size_t> kept_here;
      for (std::uint64_t c = 0; c < letters; ++c) {
        for (int i = 0; i < D; ++i) letter[i] = static_cast<std::int64_t>(exhaustive ? (c >> (l * i)) & mask : rng() & mask);
        ChildCell cc;
        cc.side = side;
        cc.corner = node.corner;
        for (int i = 0; i < D; ++i) cc.corner[i] += static_cast<double>(letter[i]) * side;
        if (D == 1 && node.cell.L + l <= kMaxCellBits) cc.cell = {(node.cell.X << static_cast<unsigned>(l)) + letter[0], node.cell.L + static_cast<int>(l)};
        ++node.tested;
        if (!keep(k + 1, letter, cc)) continue;
        ++node.kept;
        if (opt.expand_per_node && kept_here.size() >= opt.expand_per_node) continue;
        if (nodes >= opt.node_budget) {
          t.truncated = true;
          continue;
        }
        TreeNode child;
        child.parent = static_cast<std::int64_t>(idx);
        child.letter = letter;
        child.corner = cc.corner;
        child.cell = cc.cell;
        kept_here.push_back(next.size());
        next.push_back(std::move(child));
        ++nodes;
      }
      node.expanded = kept_here.size();
      for (auto i : kept_here) next[i].mass = node.mass / static_cast<double>(kept_here.size());
      const double removed = 1.0 - static_cast<double>(node.kept) / static_cast<double>(node.tested);
      pmax = std::max(pmax, removed);
      pmin = std::min(pmin, removed);
    }
    t.P_plus.push_back(pmax);
    t.P_minus.push_back(pmin);
    t.levels.push_back(std::move(next));
    if (t.levels.back().empty()) {
      t.died = true;
      break;
    }
  }
  return t;
}

struct DimensionBounds {
  bool lower_available = true;  // sup P_k^+ < 1
  bool lower_flag = false;      // f / f_+ stays bounded below: H^f > 0
  bool upper_flag = false;      // f / f_- stays bounded above: lower box f-measure finite
  double hausdorff_lower = 0.0; // liminf f / f_+ over the finer half of the scales
  double box_upper = 0.0;       // liminf f / f_- over the same scales
  double s_lower = 0.0;         // log M_-^K / log N^K
  double s_upper = 0.0;         // log M_+^K / log N^K
};

namespace detail {

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace detail

// Compares f with f_+ and f_- on rho = N^{-k} N_{k+1}^{-u}, u in {0, 1/4, 1/2, 3/4},
// over the finer half of the built levels.  Flags use the trend of log(f/f_pm)
// in log(1/rho) along the level scales u = 0, where the sawtooth of f_pm
// does not bias the fit.
inline DimensionBounds dimension_bounds(const Tree& t, const DimFunction& f) {
  DimensionBounds b;
  const std::size_t K = t.depth();
  require(K >= 2 && !t.died, "tree must be alive to depth >= 2");
  b.lower_available = t.sup_P_plus() < 1.0;
  const double logNK = static_cast<double>(t.scheme.log2_N_prod(K)) * kLn2;
  b.s_lower = t.log_M_minus_prod(K) / logNK;
  b.s_upper = t.log_M_plus_prod(K) / logNK;
  std::vector<double> xs, lo, hi, xg, lg, hg;
  for (std::size_t k = K / 2; k < K; ++k) {
    for (double u : {0.0, 0.25, 0.5, 0.75}) {
      const double log2_rho = -(static_cast<double>(t.scheme.log2_N_prod(k)) + u * t.scheme.log2_N(k + 1));
      const double rho = std::exp2(log2_rho);
      if (!(rho > 0) || rho > f.rho0()) continue;
      xs.push_back(-std::log(rho));
      lo.push_back(f.log_value(rho) - t.log_f_plus(rho));
      hi.push_back(f.log_value(rho) - t.log_f_minus(rho));
      if (u == 0.0) xg.push_back(xs.back()), lg.push_back(lo.back()), hg.push_back(hi.back());
    }
  }
  require(xg.size() >= 2, "not enough scales below rho0");
  const double tol = 1e-6;
  b.hausdorff_lower = b.lower_available ? std::exp(*std::min_element(lo.begin(), lo.end())) : 0.0;
  b.box_upper = std::exp(*std::min_element(hi.begin(), hi.end()));
  b.lower_flag = b.lower_available && detail::ls_slope(xg, lg) >= -tol;
  b.upper_flag = detail::ls_slope(xg, hg) <= tol;
  return b;
}

// Number of grid boxes of side 2 rho whose interior meets the interior of a
// deepest-level cell.  Aligned grids overcount optimal covers by at most 2^D.
inline std::uint64_t box_count(const Tree& t, double rho) {
  require(rho > 0 && rho <= 1, "rho must lie in (0, 1]");
  const std::size_t K = t.levels.size() - 1;
  const double side = std::ldexp(1.0, -static_cast<int>(t.scheme.log2_N_prod(K)));
  const double delta = 2 * rho;
  const int D = t.scheme.D();
  std::set<std::vector<std::int64_t>> boxes;
  std::vector<std::int64_t> lo(D), hi(D), cur(D);
  for (const auto& node : t.levels[K]) {
    for (int i = 0; i < D; ++i) {
      lo[i] = static_cast<std::int64_t>(std::floor(node.corner[i] / delta));
      // cells below double resolution near their corner fall in the corner's box
      hi[i] = std::max(lo[i], static_cast<std::int64_t>(std::ceil((node.corner[i] + side) / delta)) - 1);
    }
    cur = lo;
    while (true) {
      boxes.insert(cur);
      int i = D - 1;
      while (i >= 0 && cur[i] == hi[i]) cur[i] = lo[i], --i;
      if (i < 0) break;
      ++cur[i];
    }
  }
  return boxes.size();
}

// Point-set version: boxes of side 2 rho containing at least one point.
inline std::uint64_t box_count(const std::vector<Matrix>& points, double rho) {
  require(rho > 0 && rho <= 1, "rho must lie in (0, 1]");
  std::set<std::vector<std::int64_t>> boxes;
  for (const auto& x : points) {
    std::vector<std::int64_t> b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) b[i] = static_cast<std::int64_t>(std::floor(x[i] / (2 * rho)));
    boxes.insert(b);
  }
  return boxes.size();
}

// Natural measure of the sup-norm ball B(x, rho), with mass spread uniformly
// over deepest-level cells.
inline double ball_mass(const Tree& t, const Matrix& x, double rho) {
  const std::size_t K = t.levels.size() - 1;
  const double side = std::ldexp(1.0, -static_cast<int>(t.scheme.log2_N_prod(K)));
  double total = 0.0;
  for (const auto& node : t.levels[K]) {
    double frac = 1.0;
    if (side < 1e-12 * rho) {
      // point-like cell
      for (std::size_t i = 0; i < x.size(); ++i)
        if (std::abs(node.corner[i] - x[i]) > rho) frac = 0.0;
      total += node.mass * frac;
      continue;
    }
    for (std::size_t i = 0; i < x.size() && frac > 0; ++i) {
      const double a = std::max(node.corner[i], x[i] - rho), b = std::min(node.corner[i] + side, x[i] + rho);
      frac *= std::max(0.0, b - a) / side;
    }
    total += node.mass * frac;
  }
  return total;
}

struct MassCheck {
  double max_ratio = 0.0;  // max mu(B(x, rho)) / f_+(rho)
  std::size_t balls = 0;
};

// Mass distribution principle: mu(B(x, rho)) <= C f_+(rho) for balls with
// k(rho) below the built depth.
inline MassCheck mass_distribution_check(const Tree& t, std::size_t balls, std::uint64_t seed) {
  const std::size_t K = t.depth();
  require(K >= 1 && !t.died, "tree must be alive");
  std::mt19937_64 rng = shard_rng(seed, 0);
  MassCheck c;
  const double min_log2 = -static_cast<double>(t.scheme.log2_N_prod(K - 1)) - 0.999 * t.scheme.log2_N(K);
  const auto& leaves = t.levels[K];
  for (std::size_t i = 0; i < balls; ++i) {
    Matrix x(t.scheme.D());
    // half the balls centred on the set, half uniform
    if (i % 2 == 0) {
      const auto& leaf = leaves[rng() % leaves.size()];
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = leaf.corner[j];
    } else {
      for (auto& v : x) v = uniform01(rng);
    }
    const double rho = std::exp2(min_log2 * uniform01(rng));
    const double ratio = ball_mass(t, x, rho) / std::exp(t.log_f_plus(rho));
    c.max_ratio = std::max(c.max_ratio, ratio);
  }
  c.balls = balls;
  return c;
}

// One node per line: "level,word-digits,children-kept" with letters joined by
// '.', digits inside a letter by '_', and -1 for leaves.
inline void dump_tree(const Tree& t, std::ostream& os) {
  for (std::size_t k = 0; k < t.levels.size(); ++k) {
    for (std::size_t i = 0; i < t.levels[k].size(); ++i) {
      const Word w = t.word(k, i);
      os << k << ',';
      for (std::size_t j = 0; j < w.size(); ++j) {
        if (j) os << '.';
        for (std::size_t d = 0; d < w[j].size(); ++d) os << (d ? "_" : "") << w[j][d];
      }
      const bool leaf = k + 1 == t.levels.size();
      os << ',' << (leaf ? std::int64_t{-1} : static_cast<std::int64_t>(t.levels[k][i].kept)) << '\n';
    }
  }
}

namespace detail {

struct SlabWindow {
  double lo = 0, hi = 0;  // in |q|_nu units
};

// General D: sup norm on the p side, brute force over q.  Cell rows are
// boxes, so <row, q> ranges over an interval of length side |q|_1.
inline CellRelation box_vs_window(const ChildCell& cell, const Dimensions& dims, const ApproxFunction& psi,
                                  const NormSpec& mu, const NormSpec& nv, const SlabWindow& w,
                                  bool want_inside) {
  CellRelation best = CellRelation::disjoint;
  for_each_q(nv, w.lo * (1 - 1e-12), w.hi * (1 + 1e-12), true, [&](const IntVec& q, double nq) {
    if (best == CellRelation::inside || (!want_inside && best == CellRelation::meets) || nq <= 0) return;
    const double r = psi(nq) / mu.scale;
    if (!(r > 0)) return;
    bool meets = true, inside = true;
    for (int i = 0; i < dims.m && meets; ++i) {
      double lo = 0, width = 0;
      for (int j = 0; j < dims.n; ++j) {
        const double qj = static_cast<double>(q[j]);
        lo += cell.corner[i * dims.n + j] * qj + std::min(qj, 0.0) * cell.side;
        width += std::abs(qj) * cell.side;
      }
      const double hi = lo + width;
      meets = std::ceil(lo - r) <= std::floor(hi + r);
      const double p = std::round(0.5 * (lo + hi));
      inside = inside && lo >= p - r && hi <= p + r;
    }
    if (meets && inside) best = CellRelation::inside;
    else if (meets) best = CellRelation::meets;
  });
  return best;
}

inline void check_tree_args(const ApproxFunction& psi, const CodingScheme& cs, const NormSpec& mu,
                            const NormSpec& nv, double Q0, std::size_t depth) {
  require(psi.dims() == cs.dims, "psi and scheme dimensions differ");
  check_norm_dims(cs.dims, mu, nv);
  require(Q0 >= 1, "Q0 must be at least 1");
  require(depth <= cs.depth(), "depth exceeds the schedule");
  if (cs.dims == Dimensions(1, 1)) require(cs.log2_N_prod(depth) <= kMaxCellBits, "tree too deep for exact cells");
  else require(cs.log2_N_prod(depth) <= 52, "tree too deep for double cells");
  if (!(cs.dims == Dimensions(1, 1))) require(mu.kind == NormKind::sup, "cell tests for D > 1 need the sup norm on p");
}

// Window ends come from exp/log and are widened by a relative 1e-12, as in
// the box engine, so that Q^k = 16 does not turn into 15.999...
inline std::uint64_t q_floor(double v) { return static_cast<std::uint64_t>(std::floor(v * (1 + 1e-12))); }
inline std::uint64_t q_ceil(double v) { return static_cast<std::uint64_t>(std::max(1.0, std::ceil(v * (1 - 1e-12)))); }

}  // namespace detail

// Survivor tree: a child cell is removed only when it is certified to lie
// inside one slab (p, q) with Q0 <= |q| <= Q^{k+1}; ambiguous cells stay.
inline Tree build_survivor_tree(const ApproxFunction& psi, double Q0, const CodingScheme& cs, std::size_t depth,
                                const NormSpec& mu, const NormSpec& nv, const TreeOptions& opt = {}) {
  detail::check_tree_args(psi, cs, mu, nv, Q0, depth);
  const bool one = cs.dims == Dimensions(1, 1);
  const detail::SlabScale sc{one ? nv(std::vector<double>{1.0}) : 1.0, one ? mu(std::vector<double>{1.0}) : 1.0};
  auto keep = [&](std::size_t k, const IntVec&, const ChildCell& c) {
    if (psi.is_zero()) return true;
    const double hi = cs.schedule.Q(k);
    if (hi < Q0) return true;
    if (one) return !cell_inside_window(c.cell, psi, detail::q_ceil(Q0 / sc.c_nu), detail::q_floor(hi / sc.c_nu), sc);
    return detail::box_vs_window(c, cs.dims, psi, mu, nv, {Q0, hi}, true) != CellRelation::inside;
  };
  Tree t = build_tree(cs, depth, keep, opt);
  t.variant = "survivor";
  return t;
}

// Avoidance tree: a child cell is removed when it meets any slab with
// max(Q0, Q^k) <= |q| <= Q^{k+1}.  Geometric removal without the mixing
// step, so it may remove more than the paper's construction.
inline Tree build_avoidance_tree(const ApproxFunction& psi, double Q0, const CodingScheme& cs, std::size_t depth,
                                 const NormSpec& mu, const NormSpec& nv, const TreeOptions& opt = {}) {
  detail::check_tree_args(psi, cs, mu, nv, Q0, depth);
  const bool one = cs.dims == Dimensions(1, 1);
  const detail::SlabScale sc{one ? nv(std::vector<double>{1.0}) : 1.0, one ? mu(std::vector<double>{1.0}) : 1.0};
  auto keep = [&](std::size_t k, const IntVec&, const ChildCell& c) {
    if (psi.is_zero()) return true;
    const double lo = std::max(Q0, cs.schedule.Q(k - 1)), hi = cs.schedule.Q(k);
    if (hi < lo) return true;
    if (one) return !cell_meets_window(c.cell, psi, detail::q_ceil(lo / sc.c_nu), detail::q_floor(hi / sc.c_nu), sc);
    return detail::box_vs_window(c, cs.dims, psi, mu, nv, {lo, hi}, false) == CellRelation::disjoint;
  };
  Tree t = build_tree(cs, depth, keep, opt);
  t.variant = "avoidance (unconditional-geometry variant)";
  return t;
}

}  // namespace badapprox
