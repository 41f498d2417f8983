#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "badapprox/core.hpp"
#include "badapprox/dynamics.hpp"
#include "badapprox/geometry.hpp"

namespace badapprox {

inline constexpr std::uint64_t kShardSize = 1u << 16;
inline constexpr double kSampleWorkBudget = 5e10;  // samples x window size

namespace detail {

struct WindowQ {
  IntVec q;
  double radius;
};

inline std::vector<WindowQ> window_qs(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& nv) {
  std::vector<WindowQ> out;
  for_each_q(nv, Q1, Q2, true, [&](const IntVec& q, double nq) {
    if (nq > 0) out.push_back({q, psi(nq)});
  });
  return out;
}

// Runs `count_hits(rng, samples)` over fixed shards; integer hit counts make
// the total independent of thread scheduling.
inline std::uint64_t run_shards(std::uint64_t samples, std::uint64_t seed, unsigned threads,
                                const std::function<std::uint64_t(std::mt19937_64&, std::uint64_t)>& count_hits) {
  const std::uint64_t shards = (samples + kShardSize - 1) / kShardSize;
  std::vector<std::uint64_t> hits(shards, 0);
  auto work = [&](std::uint64_t first, std::uint64_t stride) {
    for (std::uint64_t s = first; s < shards; s += stride) {
      std::mt19937_64 rng = shard_rng(seed, s);
      hits[s] = count_hits(rng, std::min(kShardSize, samples - s * kShardSize));
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(shards)));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work, i, threads);
    for (auto& t : pool) t.join();
  }
  return std::accumulate(hits.begin(), hits.end(), std::uint64_t{0});
}

// m = n = 1 with q psi(|q|) < 1/2 on the window: every hit (kp, kq) has p/q a
// convergent (Legendre), and k = ceil(Q1/q) is the only multiple worth
// testing since k |q x - p| grows while psi shrinks.  Samples x = X / 2^64
// make |q x - p| exact in 64-bit modular arithmetic.
inline constexpr double kConvergentMaxQ = 1073741824.0;  // 2^30

inline bool convergent_path_applies(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                                    const NormSpec& nv) {
  if (!(psi.dims() == Dimensions(1, 1)) || !psi.monotone_witness()) return false;
  const double c = nv(std::vector<double>{1.0});
  const double qlo = std::max(1.0, std::ceil(Q1 / c - 1e-9));
  if (Q2 / c > kConvergentMaxQ) return false;
  return qlo * psi(c * qlo) / mu(std::vector<double>{1.0}) < 0.5;
}

inline std::function<std::uint64_t(std::mt19937_64&, std::uint64_t)> convergent_counter(
    const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu, const NormSpec& nv) {
  const double c = nv(std::vector<double>{1.0});
  const double unit = mu(std::vector<double>{1.0});
  const auto qlo = static_cast<std::uint64_t>(std::max(1.0, std::ceil(Q1 / c - 1e-9)));
  const auto qhi = static_cast<std::uint64_t>(std::floor(Q2 / c + 1e-9));
  auto in_window = [c, Q1, Q2](std::uint64_t q) {
    const double v = c * static_cast<double>(q);
    return v >= Q1 && v <= Q2;
  };
  return [=, &psi](std::mt19937_64& rng, std::uint64_t count) {
    using u128 = unsigned __int128;
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
      const std::uint64_t X = rng();
      if (X == 0) continue;
      auto test = [&](std::uint64_t q) {
        const std::uint64_t k = std::max<std::uint64_t>(1, (qlo + q - 1) / q);
        const std::uint64_t kq = k * q;
        if (kq > qhi || !in_window(kq)) return false;
        const std::uint64_t v = kq * X;  // mod 2^64
        const std::uint64_t dist = std::min(v, static_cast<std::uint64_t>(0) - v);
        return std::ldexp(static_cast<double>(dist), -64) * unit <= psi(c * static_cast<double>(kq));
      };
      bool hit = test(1);
      u128 a = u128{1} << 64, b = X;
      std::uint64_t qm1 = 0, q = 1;  // q_{-1}, q_0 for x = [0; a_1, ...]
      while (!hit && b != 0) {
        const u128 qn = (a / b) * q + qm1;
        if (qn > qhi) break;
        qm1 = q;
        q = static_cast<std::uint64_t>(qn);
        const u128 r = a % b;
        a = b;
        b = r;
        hit = test(q);
      }
      hits += hit;
    }
    return hits;
  };
}

// Hit test for A = offset + B / scale, B uniform in K.
inline std::function<std::uint64_t(std::mt19937_64&, std::uint64_t)> window_counter(
    const Dimensions& dims, const std::vector<WindowQ>& qs, const NormSpec& mu, const Matrix& offset, double scale) {
  if (dims.m == 1 && dims.n == 1) {
    // one scalar per q: |q x - p| <= radius / |1|_mu
    const double unit = mu(std::vector<double>{1.0});
    std::vector<double> qv, rv;
    for (const auto& w : qs) {
      qv.push_back(static_cast<double>(w.q[0]));
      rv.push_back(w.radius / unit);
    }
    const double x0 = offset[0];
    return [qv, rv, x0, scale](std::mt19937_64& rng, std::uint64_t count) {
      std::uint64_t hits = 0;
      for (std::uint64_t i = 0; i < count; ++i) {
        const double x = x0 + uniform01(rng) / scale;
        for (std::size_t j = 0; j < qv.size(); ++j) {
          const double y = qv[j] * x;
          if (std::abs(y - std::nearbyint(y)) <= rv[j]) {
            ++hits;
            break;
          }
        }
      }
      return hits;
    };
  }
  return [&dims, &qs, &mu, offset, scale](std::mt19937_64& rng, std::uint64_t count) {
    std::uint64_t hits = 0;
    Matrix A(dims.D());
    std::vector<double> res(dims.m);
    for (std::uint64_t i = 0; i < count; ++i) {
      for (int k = 0; k < dims.D(); ++k) A[k] = offset[k] + uniform01(rng) / scale;
      for (const auto& w : qs) {
        for (int r = 0; r < dims.m; ++r) {
          double s = 0.0;
          for (int j = 0; j < dims.n; ++j) s += A[r * dims.n + j] * static_cast<double>(w.q[j]);
          res[r] = s - static_cast<double>(round_half_down(s));
        }
        if (mu(res) <= w.radius) {
          ++hits;
          break;
        }
      }
    }
    return hits;
  };
}

inline void check_window_args(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                              const NormSpec& nv) {
  check_norm_dims(psi.dims(), mu, nv);
  require(Q1 > 0 && Q1 <= Q2, "need 0 < Q1 <= Q2");
}

}  // namespace detail

// Fraction of A in K = [0,1]^{m x n} lying in W_psi(Q1, Q2).
inline McEstimate mc_window_measure(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                                    const NormSpec& nv, std::uint64_t samples, std::uint64_t seed,
                                    unsigned threads = std::thread::hardware_concurrency()) {
  detail::check_window_args(psi, Q1, Q2, mu, nv);
  require(samples >= 1, "samples must be positive");
  const auto qs = detail::window_qs(psi, Q1, Q2, nv);
  const double work = static_cast<double>(samples) * static_cast<double>(qs.size());
  if (work > kSampleWorkBudget) throw BudgetError("window sampling exceeds budget", work);
  if (psi.is_zero() || qs.empty()) return binomial_estimate(0, samples);
  const Dimensions& dims = psi.dims();
  const auto counter = detail::window_counter(dims, qs, mu, Matrix(dims.D(), 0.0), 1.0);
  return binomial_estimate(detail::run_shards(samples, seed, threads, counter), samples);
}

// Same measure; for m = n = 1 in the convergent regime the window size no
// longer enters the cost, otherwise this is mc_window_measure.
inline McEstimate fast_window_measure(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                                      const NormSpec& nv, std::uint64_t samples, std::uint64_t seed,
                                      unsigned threads = std::thread::hardware_concurrency()) {
  detail::check_window_args(psi, Q1, Q2, mu, nv);
  require(samples >= 1, "samples must be positive");
  if (psi.is_zero() || !detail::convergent_path_applies(psi, Q1, Q2, mu, nv))
    return mc_window_measure(psi, Q1, Q2, mu, nv, samples, seed, threads);
  const auto counter = detail::convergent_counter(psi, Q1, Q2, mu, nv);
  return binomial_estimate(detail::run_shards(samples, seed, threads, counter), samples);
}

// (N^k)^D lambda(K_omega ∩ W_psi(Q1, Q2)) for the cylinder of omega, with
// Q^k <= Q1 <= Q2 <= Q^{k+1}, k = |omega|.  Sampled through Phi_omega.
inline McEstimate local_window_measure(const Schedule& s, const Word& omega, const ApproxFunction& psi, double Q1,
                                       double Q2, const NormSpec& mu, const NormSpec& nv, std::uint64_t samples,
                                       std::uint64_t seed) {
  detail::check_window_args(psi, Q1, Q2, mu, nv);
  const std::size_t k = omega.size();
  require(k < s.size() + 1, "word longer than the schedule");
  const double tol = 1e-12;
  const double lo = std::exp(s.log_Q(k)), hi = k < s.size() ? std::exp(s.log_Q(k + 1)) : lo;
  require(Q1 >= lo * (1 - tol) && (k >= s.size() || Q2 <= hi * (1 + tol)), "window must lie in [Q^k, Q^{k+1}]");
  const Dimensions& dims = psi.dims();
  const auto qs = detail::window_qs(psi, Q1, Q2, nv);
  const double work = static_cast<double>(samples) * static_cast<double>(qs.size());
  if (work > kSampleWorkBudget) throw BudgetError("window sampling exceeds budget", work);
  if (psi.is_zero() || qs.empty()) return binomial_estimate(0, samples);
  const double scale = std::exp(s.log_N_prod(k));
  const auto counter = detail::window_counter(dims, qs, mu, encode_word(s, omega, dims), scale);
  return binomial_estimate(detail::run_shards(samples, seed, 1, counter), samples);
}

namespace detail {

inline std::vector<int> mobius_divisors(std::int64_t g, std::vector<std::int64_t>& divisors) {
  // squarefree divisors of g with their Mobius signs
  std::vector<std::int64_t> primes;
  for (std::int64_t p = 2; p * p <= g; ++p)
    if (g % p == 0) {
      primes.push_back(p);
      while (g % p == 0) g /= p;
    }
  if (g > 1) primes.push_back(g);
  divisors.assign(1, 1);
  std::vector<int> sign{1};
  for (auto p : primes) {
    const std::size_t sz = divisors.size();
    for (std::size_t i = 0; i < sz; ++i) {
      divisors.push_back(divisors[i] * p);
      sign.push_back(-sign[i]);
    }
  }
  return sign;
}

}  // namespace detail

// Sum of lambda_K(Delta_psi(p, q)) over primitive (p, q) with the first
// nonzero coordinate of q positive and Q1 <= |q|_nu <= Q2.  Exact slab
// measures need the sup norm on the p side.
inline double sum_with_multiplicity(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                                    const NormSpec& nv) {
  detail::check_window_args(psi, Q1, Q2, mu, nv);
  if (mu.kind != NormKind::sup) throw std::invalid_argument("exact measure requires sup norm");
  const Dimensions& dims = psi.dims();
  if (psi.is_zero() || Q1 == Q2) return 0.0;
  double total = 0.0;
  std::vector<std::int64_t> divisors;
  std::vector<double> f;
  for_each_q(nv, Q1, Q2, true, [&](const IntVec& q, double nq) {
    if (nq <= 0) return;
    const double r = psi(nq) / mu.scale;
    std::int64_t g = 0;
    for (auto v : q) g = std::gcd(g, v < 0 ? -v : v);
    // f(p) = P(|<t, q> - p| <= r), t uniform in [0,1]^n
    std::int64_t lo = 0, hi = 0;
    for (auto v : q) (v < 0 ? lo : hi) += v;
    const auto p_lo = static_cast<std::int64_t>(std::floor(lo - r));
    const auto p_hi = static_cast<std::int64_t>(std::ceil(hi + r));
    const auto sign = detail::mobius_divisors(g, divisors);
    if (dims.n == 1) {
      // uniform density on [0, a]: interior p carry 2r/a, only the edges are partial
      const double a = static_cast<double>(hi);
      auto f1 = [&](std::int64_t p) {
        return std::max(0.0, std::min<double>(p + r, a) - std::max<double>(p - r, 0.0)) / a;
      };
      const auto in_lo = static_cast<std::int64_t>(std::ceil(r));
      const auto in_hi = static_cast<std::int64_t>(std::floor(a - r));
      for (std::size_t i = 0; i < divisors.size(); ++i) {
        const std::int64_t e = divisors[i];
        auto first_multiple = [e](std::int64_t x) { return x >= 0 ? (x + e - 1) / e * e : -((-x) / e) * e; };
        double S = 0.0;
        if (in_lo > in_hi) {
          for (std::int64_t p = first_multiple(p_lo); p <= p_hi; p += e) S += f1(p);
        } else {
          const std::int64_t count = in_hi / e - (in_lo + e - 1) / e + 1;
          S = static_cast<double>(count) * (2 * r / a);
          for (std::int64_t p = first_multiple(p_lo); p < in_lo; p += e) S += f1(p);
          for (std::int64_t p = first_multiple(in_hi + 1); p <= p_hi; p += e) S += f1(p);
        }
        total += sign[i] * std::pow(S, dims.m);
      }
      return;
    }
    f.assign(static_cast<std::size_t>(p_hi - p_lo + 1), 0.0);
    const RowDensity rho(q);
    for (std::int64_t p = p_lo; p <= p_hi; ++p) f[p - p_lo] = rho.interval(p - r, p + r);
    // primitive p: Mobius inversion over squarefree e | gcd(q)
    for (std::size_t i = 0; i < divisors.size(); ++i) {
      const std::int64_t e = divisors[i];
      double S = 0.0;
      for (std::int64_t p = p_lo; p <= p_hi; ++p)
        if (p % e == 0) S += f[p - p_lo];
      total += sign[i] * std::pow(S, dims.m);
    }
  });
  return total;
}

struct PairCorrelation {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  std::size_t sampled = 0;
};

// Quasi-independence audit for m = n = 1: for sampled primitive r = (p, q)
// with Q1 <= q <= Q2, the exact sum over r' = (p', q') not in Z r with
// q <= q' <= Q2 of |Delta(r) ∩ Delta(r') ∩ [0,1]|, divided by
// Psi(q) (F_psi(Q1, Q2) + phi(Q1)).
inline PairCorrelation pair_correlation_audit(const ApproxFunction& psi, double Q1, double Q2,
                                              std::size_t sample_r, std::uint64_t seed) {
  require(psi.dims() == Dimensions(1, 1), "pair correlation audit is exact only for m = n = 1");
  require(Q1 >= 1 && Q1 <= Q2, "need 1 <= Q1 <= Q2");
  require(sample_r >= 1, "need at least one sample");
  PairCorrelation out;
  if (psi.is_zero()) return out;
  const auto qlo = static_cast<std::int64_t>(std::ceil(Q1));
  const auto qhi = static_cast<std::int64_t>(std::floor(Q2));
  require(qlo <= qhi, "window contains no integer q");
  const double Fbar = psi.F(Q1, Q2) + psi.phi(Q1);
  std::mt19937_64 rng = shard_rng(seed, 0);
  std::uniform_int_distribution<std::int64_t> qdist(qlo, qhi);
  double sum_ratio = 0.0;
  for (std::size_t s = 0; s < sample_r; ++s) {
    const std::int64_t q = qdist(rng);
    std::int64_t p;
    do {
      p = std::uniform_int_distribution<std::int64_t>(0, q)(rng);
    } while (std::gcd(p, q) != 1);
    const double rq = psi(static_cast<double>(q));
    const double a = std::max(0.0, (p - rq) / q), b = std::min(1.0, (p + rq) / q);
    double sum = 0.0;
    if (b > a) {
      for (std::int64_t q2 = q; q2 <= qhi; ++q2) {
        const double r2 = psi(static_cast<double>(q2));
        const auto p2lo = static_cast<std::int64_t>(std::floor(a * q2 - r2));
        const auto p2hi = static_cast<std::int64_t>(std::ceil(b * q2 + r2));
        for (std::int64_t p2 = p2lo; p2 <= p2hi; ++p2) {
          if (q2 % q == 0 && p2 == p * (q2 / q)) continue;  // r' in Z r
          const double lo = std::max(a, (p2 - r2) / q2), hi = std::min(b, (p2 + r2) / q2);
          if (hi > lo) sum += hi - lo;
        }
      }
    }
    const double ratio = sum / (psi.Psi(static_cast<double>(q)) * Fbar);
    out.max_ratio = std::max(out.max_ratio, ratio);
    sum_ratio += ratio;
  }
  out.sampled = sample_r;
  out.mean_ratio = sum_ratio / static_cast<double>(sample_r);
  return out;
}

// Radial integration check: int_{|q|_nu <= R} f(|q|_nu) dq against
// n V_nu int_0^R s^{n-1} f(s) ds.
struct RadialCheck {
  double mc = 0.0;
  double mc_stderr = 0.0;
  double radial = 0.0;
};

inline RadialCheck radial_identity_check(const NormSpec& nv, const std::function<double(double)>& f, double R,
                                         std::uint64_t samples, std::uint64_t seed) {
  require(R > 0 && samples >= 1000, "need R > 0 and at least 1000 samples");
  const int n = nv.dim;
  const double box = R / nv.sup_lower_factor();  // the ball sits in [-box, box]^n
  const double vol_box = std::pow(2 * box, n);
  std::mt19937_64 rng = shard_rng(seed, 0);
  std::vector<double> x(n);
  double s1 = 0.0, s2 = 0.0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    for (auto& v : x) v = (2 * uniform01(rng) - 1) * box;
    const double r = nv(x);
    const double v = r <= R ? f(r) : 0.0;
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / samples;
  RadialCheck out;
  out.mc = vol_box * mean;
  out.mc_stderr = vol_box * std::sqrt(std::max(0.0, s2 / samples - mean * mean) / samples);
  // composite Simpson on [0, R]
  const int steps = 20000;
  const double h = R / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double s = i * h;
    const double w = (i == 0 || i == steps) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::pow(s, n - 1) * f(s);
  }
  out.radial = n * unit_ball_volume(nv) * acc * h / 3;
  return out;
}

enum class Regime { in_regime, marginal };

inline std::string to_string(Regime r) { return r == Regime::in_regime ? "in-regime" : "marginal"; }

// Thresholds for the asymptotic law: Q1 >= 100, phi(Q1) <= F/10, F <= 0.5.
inline Regime window_regime(const ApproxFunction& psi, double Q1, double F) {
  return (Q1 >= 100 && psi.phi(Q1) <= F / 10 && F <= 0.5) ? Regime::in_regime : Regime::marginal;
}

struct WindowReport {
  double Q1 = 0.0, Q2 = 0.0;
  McEstimate mc;
  double multiplicity_sum = std::numeric_limits<double>::quiet_NaN();  // NaN without sup mu
  double F = 0.0;
  double eta = 0.0;
  double prediction = 0.0;  // 1 - exp(-eta F)
  double ratio = 0.0;       // -log(1 - estimate) / (eta F)
  Regime regime = Regime::marginal;
};

inline WindowReport window_report(const ApproxFunction& psi, double Q1, double Q2, const NormSpec& mu,
                                  const NormSpec& nv, std::uint64_t samples, std::uint64_t seed,
                                  bool with_sum = true) {
  WindowReport w;
  w.Q1 = Q1;
  w.Q2 = Q2;
  w.mc = fast_window_measure(psi, Q1, Q2, mu, nv, samples, seed);
  if (with_sum && mu.kind == NormKind::sup) w.multiplicity_sum = sum_with_multiplicity(psi, Q1, Q2, mu, nv);
  w.F = psi.F(Q1, Q2);
  w.eta = eta(psi.dims(), mu, nv);
  w.prediction = -std::expm1(-w.eta * w.F);
  w.ratio = w.F > 0 && w.mc.estimate < 1 ? -std::log1p(-w.mc.estimate) / (w.eta * w.F)
                                         : std::numeric_limits<double>::quiet_NaN();
  w.regime = window_regime(psi, Q1, w.F);
  return w;
}

}  // namespace badapprox
