#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "badapprox/window.hpp"

using namespace badapprox;

namespace {

const Dimensions d11(1, 1), d21(2, 1), d12(1, 2);
const NormSpec s1 = NormSpec::sup(1);

std::vector<std::int64_t> phi_sieve(std::int64_t N) {
  std::vector<std::int64_t> phi(N + 1);
  std::iota(phi.begin(), phi.end(), 0);
  for (std::int64_t p = 2; p <= N; ++p)
    if (phi[p] == p)
      for (std::int64_t k = p; k <= N; k += p) phi[k] -= phi[k] / p;
  return phi;
}

// Exact measure of W for m = n = 1 as a union of intervals.
double exact_window_1d(const ApproxFunction& psi, std::int64_t q1, std::int64_t q2, bool primitive_only = false) {
  std::vector<std::pair<double, double>> iv;
  for (std::int64_t q = q1; q <= q2; ++q) {
    const double r = psi(static_cast<double>(q));
    for (std::int64_t p = 0; p <= q; ++p)
      if (!primitive_only || std::gcd(p, q) == 1) iv.emplace_back(std::max(0.0, (p - r) / q), std::min(1.0, (p + r) / q));
  }
  std::sort(iv.begin(), iv.end());
  double total = 0.0, lo = -1, hi = -1;
  for (auto [a, b] : iv) {
    if (a > hi) {
      total += std::max(0.0, hi - lo);
      lo = a;
      hi = b;
    } else {
      hi = std::max(hi, b);
    }
  }
  return total + std::max(0.0, hi - lo);
}

}  // namespace

TEST(WindowMeasure, ZeroFunction) {
  const auto zero = ApproxFunction::power_law(d11, 0.0);
  EXPECT_EQ(mc_window_measure(zero, 10, 1000, s1, s1, 10000, 1).estimate, 0.0);
  EXPECT_EQ(sum_with_multiplicity(zero, 10, 1000, s1, s1), 0.0);
}

TEST(WindowMeasure, HeadlineExample) {
  const auto psi = ApproxFunction::power_law(d11, 0.05);
  const auto w = window_report(psi, 10, 1000, s1, s1, 200000, 7);
  EXPECT_NEAR(w.F, 0.05 * std::log(100.0), 1e-12);
  EXPECT_NEAR(w.eta, 12 / (std::numbers::pi * std::numbers::pi), 1e-12);
  EXPECT_NEAR(w.prediction, 0.244, 5e-4);
  // the exact measure sits well above the Poisson prediction at this kappa
  const double exact = exact_window_1d(psi, 10, 1000);
  EXPECT_NEAR(exact, 0.29270, 1e-5);
  EXPECT_LE(std::abs(w.mc.estimate - exact), 4 * w.mc.stderr_);
  EXPECT_EQ(w.regime, Regime::marginal);
}

TEST(WindowMeasure, ConvergentPathMatchesBruteForce) {
  for (double kappa : {0.02, 0.05, 0.2, 0.45}) {
    const auto psi = ApproxFunction::power_law(d11, kappa);
    for (auto [q1, q2] : {std::pair{1.0, 300.0}, std::pair{10.0, 1000.0}, std::pair{37.5, 400.0}}) {
      const double exact = exact_window_1d(psi, static_cast<std::int64_t>(std::ceil(q1)), static_cast<std::int64_t>(q2));
      const auto fast = fast_window_measure(psi, q1, q2, s1, s1, 100000, 3);
      EXPECT_LE(std::abs(fast.estimate - exact), 4 * fast.stderr_ + 1e-12) << kappa << " " << q1;
    }
  }
  // log-corrected family
  const auto lc = ApproxFunction::log_corrected(d11, 0.05);
  const auto a = fast_window_measure(lc, 20, 2000, s1, s1, 100000, 5);
  const auto b = mc_window_measure(lc, 20, 2000, s1, s1, 100000, 6);
  EXPECT_LE(std::abs(a.estimate - b.estimate), 4 * std::hypot(a.stderr_, b.stderr_));
  EXPECT_FALSE(detail::convergent_path_applies(ApproxFunction::power_law(d11, 0.6), 1, 1000, s1, s1));
}

TEST(WindowMeasure, DirichletWindowCoversEverything) {
  const auto star = ApproxFunction::power_law(d11, 1.0);
  EXPECT_EQ(mc_window_measure(star, 1, 1000, s1, s1, 20000, 3).estimate, 1.0);
}

TEST(WindowMeasure, AgreesWithExactUnionOfIntervals) {
  for (double kappa : {0.02, 0.1, 0.3}) {
    const auto psi = ApproxFunction::power_law(d11, kappa);
    const double exact = exact_window_1d(psi, 5, 60);
    const auto mc = mc_window_measure(psi, 5, 60, s1, s1, 200000, 11);
    EXPECT_LE(std::abs(mc.estimate - exact), 4 * mc.stderr_ + 1e-12) << kappa;
  }
}

TEST(WindowMeasure, DeterministicAcrossThreadCounts) {
  const auto psi = ApproxFunction::power_law(d21, 0.1);
  const NormSpec mu = NormSpec::sup(2);
  const auto a = mc_window_measure(psi, 2, 12, mu, s1, 150000, 5, 1);
  const auto b = mc_window_measure(psi, 2, 12, mu, s1, 150000, 5, 4);
  const auto c = mc_window_measure(psi, 2, 12, mu, s1, 150000, 6, 1);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_NE(a.hits, c.hits);
}

TEST(WindowMeasure, GeneralPathMatchesHitList) {
  std::mt19937_64 rng(12);
  for (auto dims : {d21, d12}) {
    const auto psi = ApproxFunction::power_law(dims, 0.2);
    const NormSpec mu = NormSpec::sup(dims.m), nv = NormSpec::sup(dims.n);
    std::uint64_t hits = 0;
    const std::uint64_t N = 20000;
    Matrix A(dims.D());
    for (std::uint64_t i = 0; i < N; ++i) {
      sample_matrix(rng, A);
      hits += !hit_list(A, dims, psi, 2, 8, mu, nv).empty();
    }
    const auto brute = binomial_estimate(hits, N);
    const auto mc = mc_window_measure(psi, 2, 8, mu, nv, N, 13);
    EXPECT_LE(std::abs(mc.estimate - brute.estimate), 4 * std::hypot(mc.stderr_, brute.stderr_));
  }
}

TEST(WindowMeasure, HeuristicLawInRegime) {
  // in regime the window spans many octaves: log(Q2/Q1) >= 10 for power laws
  const auto psi = ApproxFunction::power_law(d11, 0.01);
  const double Q1 = 100, Q2 = 100 * std::exp(30.0 / 3.0) * 3;
  const auto w = window_report(psi, Q1, Q2, s1, s1, 400000, 21, false);
  const double lhs = -std::log1p(-w.mc.estimate);
  const double se = w.mc.stderr_ / (1 - w.mc.estimate);
  EXPECT_EQ(w.regime, Regime::in_regime);
  EXPECT_LE(std::abs(lhs - w.eta * w.F), std::max(0.15 * w.eta * w.F, 4 * se));
}

TEST(Multiplicity, EulerPhiOracle) {
  const auto phi = phi_sieve(2000);
  for (double kappa : {0.01, 0.02, 0.2}) {
    const auto psi = ApproxFunction::power_law(d11, kappa);
    for (auto [q1, q2] : {std::pair{1, 50}, std::pair{100, 1000}, std::pair{37, 2000}}) {
      double oracle = 0.0;
      for (int q = q1; q <= q2; ++q) oracle += 2 * kappa * phi[q] / (double(q) * q);
      EXPECT_NEAR(sum_with_multiplicity(psi, q1, q2, s1, s1), oracle, 1e-10 * oracle);
    }
  }
}

TEST(Multiplicity, DegenerateWindowAndNorms) {
  const auto psi = ApproxFunction::power_law(d11, 0.02);
  EXPECT_EQ(sum_with_multiplicity(psi, 50, 50, s1, s1), 0.0);
  EXPECT_THROW(sum_with_multiplicity(ApproxFunction::power_law(d21, 0.1), 2, 5, NormSpec::l2(2), s1),
               std::invalid_argument);
  EXPECT_THROW(sum_with_multiplicity(psi, 50, 10, s1, s1), std::invalid_argument);
}

TEST(Multiplicity, ApproachesEtaF) {
  const auto psi = ApproxFunction::power_law(d11, 0.02);
  const double e = eta(d11, s1, s1);
  double prev_err = 1e300;
  for (double Q1 : {10.0, 100.0, 1000.0}) {
    const double Q2 = 100 * Q1;
    const double ratio = sum_with_multiplicity(psi, Q1, Q2, s1, s1) / (e * psi.F(Q1, Q2));
    EXPECT_LT(std::abs(ratio - 1), prev_err + 1e-3);
    prev_err = std::abs(ratio - 1);
  }
  EXPECT_LT(prev_err, 0.01);
}

TEST(Multiplicity, UnionBound) {
  struct Case {
    Dimensions dims;
    double kappa, Q1, Q2;
  };
  for (auto c : {Case{d11, 0.1, 3, 200}, Case{d21, 0.1, 2, 10}, Case{d12, 0.15, 2, 10}, Case{d12, 0.05, 3, 15}}) {
    const auto psi = ApproxFunction::power_law(c.dims, c.kappa);
    const NormSpec mu = NormSpec::sup(c.dims.m), nv = NormSpec::sup(c.dims.n);
    const auto mc = mc_window_measure(psi, c.Q1, c.Q2, mu, nv, 40000, 17);
    const double sum = sum_with_multiplicity(psi, c.Q1, c.Q2, mu, nv);
    EXPECT_LE(mc.estimate, sum + 4 * mc.stderr_);
  }
}

TEST(Multiplicity, SmallWindowsAreDisjoint) {
  // with tiny psi the primitive slabs do not overlap, so the sum is their union
  const auto psi = ApproxFunction::power_law(d11, 1e-3);
  const double exact = exact_window_1d(psi, 3, 40, true);
  EXPECT_NEAR(sum_with_multiplicity(psi, 3, 40, s1, s1), exact, 1e-12);
}

TEST(PairCorrelation, TinyPsiHasNoOverlaps) {
  const auto psi = ApproxFunction::power_law(d11, 1e-6);
  EXPECT_EQ(pair_correlation_audit(psi, 10, 100, 50, 3).max_ratio, 0.0);
}

TEST(PairCorrelation, BoundedRatio) {
  const auto psi = ApproxFunction::power_law(d11, 0.02);
  const auto pc = pair_correlation_audit(psi, 50, 500, 200, 4);
  EXPECT_LE(pc.max_ratio, 50.0);
  EXPECT_LE(pc.mean_ratio, pc.max_ratio);
  // overlaps need q' >~ q / kappa, so a wider window with larger kappa has some
  const auto wide = pair_correlation_audit(ApproxFunction::power_law(d11, 0.2), 5, 500, 200, 4);
  EXPECT_GT(wide.max_ratio, 0.0);
  EXPECT_LE(wide.max_ratio, 50.0);
}

TEST(PairCorrelation, MultiplesAreExcluded) {
  // r = (1, 2): r' = (2, 4) shares its slab exactly but is skipped
  const auto psi = ApproxFunction::power_law(d11, 1e-6);
  const auto pc = pair_correlation_audit(psi, 2, 4, 20, 9);
  EXPECT_EQ(pc.max_ratio, 0.0);
}

TEST(LocalWindow, EmptyWordIsGlobalMeasure) {
  const auto s = constant_schedule(d11, 0.5, 0.5, 0.5, 3);  // N_k = 8
  const auto psi = ApproxFunction::power_law(d11, 0.05);
  const double Q1 = s.Q(0), Q2 = s.Q(1);
  const auto a = local_window_measure(s, {}, psi, Q1, Q2, s1, s1, 50000, 8);
  const auto b = mc_window_measure(psi, Q1, Q2, s1, s1, 50000, 8, 1);
  EXPECT_EQ(a.hits, b.hits);
  EXPECT_THROW(local_window_measure(s, {{3}}, psi, Q1, Q2, s1, s1, 1000, 8), std::invalid_argument);
}

TEST(LocalWindow, RescalingIdentity) {
  // On K_omega the window equals the window of psi'(q') = Q^k psi(Q^k q')
  // for the lattice Lambda_omega, tested sample by sample.
  const auto s = constant_schedule(d11, 0.5, 0.5, 0.5, 6);
  const auto psi = ApproxFunction::power_law(d11, 0.05);
  const Word w{{5}, {3}, {6}, {1}};
  const double Qk = s.Q(4), Q1 = Qk, Q2 = s.Q(5);
  const Lattice L = cylinder_lattice(s, w, d11);
  std::mt19937_64 rng = shard_rng(8, 0);
  std::uint64_t hits = 0;
  const std::uint64_t N = 20000;
  for (std::uint64_t i = 0; i < N; ++i) {
    const double B = uniform01(rng);
    bool hit = false;
    // vectors of Lambda_omega with q' = q / Q^k; p' - B q' is the first coordinate of u_B applied
    for (std::int64_t q = static_cast<std::int64_t>(std::ceil(Q1)); q <= Q2 && !hit; ++q) {
      const double qp = q / Qk;
      const double shift = L.basis()(0, 1) * q;  // -(N^k)^{1/2} pi q
      const double c = std::round(-(shift - B * qp) / L.basis()(0, 0));
      for (double p = c - 1; p <= c + 1; ++p) {
        const double pp = L.basis()(0, 0) * p + shift;
        if (std::abs(pp - B * qp) <= Qk * psi(Qk * qp)) hit = true;
      }
    }
    hits += hit;
  }
  const auto local = local_window_measure(s, w, psi, Q1, Q2, s1, s1, N, 8);
  EXPECT_EQ(local.hits, hits);
  // prediction for a full block: eta beta-scale
  EXPECT_NEAR(s.psi.F(Q1, Q2), s.block_F(4), 1e-12);
}

TEST(Radial, SphericalCoordinatesIdentity) {
  const std::function<double(double)> fs[] = {[](double r) { return 1.0; }, [](double r) { return r * r; },
                                              [](double r) { return std::exp(-r); }};
  for (const auto& nv : {NormSpec::sup(2), NormSpec::l1(2), NormSpec::l2(3)}) {
    for (const auto& f : fs) {
      const auto c = radial_identity_check(nv, f, 2.0, 200000, 5);
      EXPECT_LE(std::abs(c.mc - c.radial), 3 * c.mc_stderr + 1e-9);
    }
  }
}

TEST(Regime, Thresholds) {
  const auto psi = ApproxFunction::power_law(d11, 0.01);
  EXPECT_EQ(window_regime(psi, 100, 0.2), Regime::in_regime);
  EXPECT_EQ(window_regime(psi, 50, 0.2), Regime::marginal);
  EXPECT_EQ(window_regime(psi, 100, 0.05), Regime::marginal);  // phi = 0.01 > F / 10
  EXPECT_EQ(window_regime(psi, 100, 0.6), Regime::marginal);
  EXPECT_EQ(to_string(Regime::in_regime), "in-regime");
}
