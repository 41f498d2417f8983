// One PASS/FAIL line per acceptance criterion.  Exit status is nonzero when
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "badapprox/cf_oracle.hpp"
#include "badapprox/core.hpp"
#include "badapprox/dynamics.hpp"
#include "badapprox/fractal.hpp"
#include "badapprox/lattice.hpp"
#include "badapprox/scheduler.hpp"
#include "badapprox/window.hpp"

using namespace badapprox;

namespace {

const Dimensions d11{1, 1};
const NormSpec s1 = NormSpec::sup(1);
constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [fails: " << what << "]";
    }
  }
};

// Criterion 2 and 7 payloads, rerun by criterion 11.
struct WindowRun {
  std::vector<McEstimate> est;
};

WindowRun window_runs() {
  WindowRun w;
  for (double kappa : {0.05, 0.1, 0.02}) {
    const auto psi = ApproxFunction::power_law(d11, kappa);
    w.est.push_back(fast_window_measure(psi, 10, 1000, s1, s1, 1000000, 2024));
  }
  return w;
}

std::vector<Tree> survivor_runs() {
  const auto psi = ApproxFunction::power_law(d11, 0.05);
  const CodingScheme cs{build_schedule(psi, 0.5, 0.5, 3), d11};
  TreeOptions opt;
  opt.expand_per_node = 3;
  opt.seed = 2024;
  std::vector<Tree> out;
  for (double kappa : {0.05, 0.1})
    out.push_back(build_survivor_tree(ApproxFunction::power_law(d11, kappa), 1, cs, 3, s1, s1, opt));
  return out;
}

void c1(Outcome& o) {
  const double th = theta(d11, s1, s1), et = eta(d11, s1, s1);
  o.note << "theta=" << th << " eta=" << et;
  o.check(std::abs(th - 6 / (kPi * kPi)) <= 1e-12, "theta = 6/pi^2");
  o.check(std::abs(et - 2 * th) <= 1e-12, "eta = 2 theta");
}

void c2(Outcome& o) {
  const WindowRun w = window_runs();
  const double eta11 = eta(d11, s1, s1);
  const auto psi = ApproxFunction::power_law(d11, 0.05);
  const double F = psi.F(10, 1000);
  const double pred = -std::expm1(-eta11 * F);
  const McEstimate& e = w.est[0];
  o.note << "estimate=" << e.estimate << "+-" << e.stderr_ << " prediction=" << pred << " F=" << F;
  o.check(std::abs(F - 0.230259) <= 5e-7, "F = 0.230259");
  o.check(std::abs(e.estimate - pred) <= std::max(0.02, 4 * e.stderr_), "|estimate - prediction| <= max(0.02, 4 stderr)");
  // sweep kappa = 0.1, 0.05, 0.02
  std::vector<double> ratios;
  const double kap[] = {0.05, 0.1, 0.02};
  for (int i : {1, 0, 2}) {
    const double Fk = ApproxFunction::power_law(d11, kap[i]).F(10, 1000);
    ratios.push_back(-std::log1p(-w.est[i].estimate) / (eta11 * Fk));
  }
  o.note << " ratios(0.1,0.05,0.02)=" << ratios[0] << "," << ratios[1] << "," << ratios[2];
  bool band = true;
  for (double r : ratios) band = band && r >= 0.85 && r <= 1.15;
  o.check(band, "ratios within [0.85, 1.15]");
  o.check(std::abs(ratios[0] - 1) > std::abs(ratios[1] - 1) && std::abs(ratios[1] - 1) > std::abs(ratios[2] - 1),
          "ratios approach 1 monotonically");
}

void c3(Outcome& o) {
  const auto psi = ApproxFunction::power_law(d11, 0.02);
  const double s = sum_with_multiplicity(psi, 100, 10000, s1, s1);
  const double target = eta(d11, s1, s1) * psi.F(100, 10000);
  o.note << "sum=" << s << " etaF=" << target << " rel=" << std::abs(s - target) / target;
  o.check(std::abs(s - target) <= 0.05 * target, "within 5% of eta F");
}

void c4(Outcome& o) {
  int schedules = 0;
  for (double kappa : {0.01, 0.05})
    for (double beta : {0.2, 0.5, 1.0}) {
      const auto psi = ApproxFunction::power_law(d11, kappa);
      const Schedule s = build_schedule(psi, beta, 0.5, 50);
      o.check(check_block_bounds(s).ok, "block bounds for PowerLaw");
      const std::int64_t l = constant_exponent(kappa, beta, 0.5);
      for (auto x : s.exponents) o.check(x == l, "constant exponent");
      ++schedules;
    }
  // LogCorrected(1): beta = 1 needs more than 2^62 for 50 levels; smaller beta fit
  const auto lc = ApproxFunction::log_corrected(d11, 1.0);
  for (double beta : {0.2, 0.5}) {
    const Schedule s = build_schedule(lc, beta, 0.5, 50);
    o.check(check_block_bounds(s).ok, "block bounds for LogCorrected");
    ++schedules;
  }
  bool overflow = false;
  try {
    build_schedule(lc, 1.0, 0.5, 50);
  } catch (const std::overflow_error&) {
    overflow = true;
  }
  o.note << schedules << " schedules x 50 levels checked; LogCorrected beta=1 reports capacity overflow=" << overflow;
  o.check(overflow, "capacity overflow reported for LogCorrected beta=1");
}

void c5(Outcome& o) {
  const auto psi = ApproxFunction::log_corrected(d11, 1.0);
  const double crit = 12 / (kPi * kPi);
  for (double s : {0.5, 1.0, 1.5, 2.0}) {
    const Verdict v = classify(DimFunction::log_power(d11, s), psi, d11, s1, s1).verdict;
    o.note << "s=" << s << ":" << to_string(v) << " ";
    o.check((v == Verdict::Zero) == (s < crit) && (v == Verdict::Infinity) == (s > crit), "trichotomy grid");
  }
  const Dimensions d21{2, 1};
  const auto base = ApproxFunction::log_corrected(d21, 1.0);
  for (double g : {0.5, 1.0, 2.0}) {
    const double L = L_exponent(DimFunction::corollary(base, 0.1), base.scaled(g)).value;
    o.check(std::abs(L - std::pow(g, -2.0)) <= 1e-9, "corollary L = gamma^-m");
  }
  o.note << "corollary L = gamma^-2 checked for gamma in {0.5,1,2}";
}

void c6(Outcome& o) {
  const CodingScheme cs = uniform_scheme(d11, 2, 12);
  const Tree t = build_tree(cs, 12, [](std::size_t, const IntVec& a, const ChildCell&) { return a[0] != 3; });
  const double s = std::log(3.0) / std::log(4.0);
  const DimensionBounds b = dimension_bounds(t, DimFunction::power(d11, s));
  // nothing removed: exponents are exactly D at any depth
  const Tree full = build_tree(cs, 6, [](std::size_t, const IntVec&, const ChildCell&) { return true; });
  const DimensionBounds bf = dimension_bounds(full, DimFunction::power(d11, 1.0));
  o.note << "keep3: lower=" << b.s_lower << " upper=" << b.s_upper << " target=" << s << "; full: " << bf.s_lower << ","
         << bf.s_upper;
  o.check(std::abs(b.s_lower - s) <= 0.01 && std::abs(b.s_upper - s) <= 0.01, "keep-3 exponents");
  o.check(b.lower_flag && b.upper_flag, "bounds flags at s");
  o.check(bf.s_lower == 1.0 && bf.s_upper == 1.0, "full tree gives D");
}

void c7(Outcome& o) {
  const auto trees = survivor_runs();
  const double eb = eta(d11, s1, s1) * 0.5;
  bool band = true;
  o.note << "eta*beta=" << eb << " P^-(0.05)=";
  for (std::size_t k = 0; k < 3; ++k) {
    const double p = trees[0].P_minus[k];
    o.note << (k ? "," : "") << p;
    band = band && p >= 0.5 * eb && p <= 2 * eb;
    o.check(p > 0, "positive removal");
    o.check(trees[1].P_minus[k] >= p, "monotone in kappa");
  }
  o.note << " P^-(0.1)=" << trees[1].P_minus[0] << "," << trees[1].P_minus[1] << "," << trees[1].P_minus[2];
  o.note << " band[0.5,2]*eta*beta=" << (band ? "inside" : "outside") << " sampled=" << trees[0].sampled;
}

void c8(Outcome& o) {
  const double golden = (std::sqrt(5.0) - 1) / 2;
  const double g = lagrange_constant(golden, 30).value, r2 = lagrange_constant(std::sqrt(2.0) - 1, 30).value;
  o.note << "golden=" << g << " sqrt2-1=" << r2;
  o.check(std::abs(g - 1 / std::sqrt(5.0)) <= 1e-6, "golden ratio");
  o.check(std::abs(r2 - 1 / (2 * std::sqrt(2.0))) <= 1e-6, "sqrt 2 - 1");
  const double k = 1e-3;
  const double lhs = hensley_dim(k).value - (1 - 6 / (kPi * kPi) * k);
  const double rhs = -(72 / std::pow(kPi, 4)) * k * k * std::abs(std::log(k));
  o.check(std::abs(lhs - rhs) <= 1e-15, "hensley expansion identity");
  for (double kap : {0.01, 0.03, 0.05}) {
    const auto [lo, hi] = kurzweil_band(kap);
    const double h = hensley_dim(kap).value;
    o.check(h >= lo && h <= hi, "hensley inside kurzweil band");
  }
}

void c9(Outcome& o) {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> tdist(-5.0, 5.0);
  const Dimensions all[] = {d11, {2, 1}, {1, 2}, {2, 2}};
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const Dimensions dims = all[i % 4];
    Matrix A(dims.D());
    for (auto& a : A) a = uniform01(rng);
    const double t = tdist(rng), s = dims.delta() * t;
    Matrix B = A;
    for (auto& b : B) b *= std::exp(-t);
    const Mat lhs = make_g(-s, dims) * make_u(A, dims) * make_g(s, dims);
    const Mat rhs = make_u(B, dims);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
  o.note << "conjugation error=" << worst;
  o.check(worst <= 1e-12, "conjugation identity");
  const double r0 = r_psi_solve(ApproxFunction::power_law(d11, 1.0), 5.0);
  const double rk = r_psi_solve(ApproxFunction::power_law(d11, 0.1), 8.0);
  o.note << " r(psi*)=" << r0 << " r(0.1 psi*)=" << rk;
  o.check(std::abs(r0) <= 1e-9, "r_psi = 0 for psi_*");
  o.check(std::abs(rk - std::abs(std::log(0.1)) / 2) <= 1e-9, "r_psi = |log kappa|/2");
  for (auto dims : all) {
    const double delta = delta_fn(Lattice::standard(dims.d()), dims, NormSpec::sup(dims.m), NormSpec::sup(dims.n));
    o.check(delta == 0.0, "Delta(Z^d) = 0");
  }
}

void c10(Outcome& o) {
  std::mt19937_64 rng(101);
  double inv = 0, cov = 0;
  for (int i = 0; i < 50; ++i) {
    const int d = 2 + i % 4;
    Mat B = Mat::Random(d, d);
    for (int j = 0; j < d; ++j) B(j, j) += 2.0;
    B /= std::pow(std::abs(B.determinant()), 1.0 / d);
    const Lattice L(B);
    inv = std::max(inv, (dual(dual(L)).basis() - L.basis()).cwiseAbs().maxCoeff());
    cov = std::max(cov, std::abs(L.covolume() * dual(L).covolume() - 1));
  }
  o.note << "dual error=" << inv << " covolume error=" << cov;
  o.check(inv <= 1e-12, "dual involution");
  o.check(cov <= 1e-12, "covolume product");
  const double irr = irregularity(Lattice::standard(2), IVec{{3, 5}}, LatticeNorm::plain(NormSpec::sup(2)));
  o.note << " Irr(3,5)=" << irr;
  o.check(irr == 1.0, "Irr((3,5)) = 1");
  const Dimensions d12{1, 2};
  const LatticeNorm norm = LatticeNorm::mixed(d12, NormSpec::sup(1), NormSpec::sup(2));
  const std::vector<Lattice> panel{Lattice::standard(3), flow_lattice({0.381966, 0.723607}, 0.5, d12),
                                   flow_lattice({0.271828, 0.141421}, 2.0, d12)};
  for (const auto& L : panel) {
    const auto eps = epsilon_K_profile(L, {1, 2, 4, 8, 10}, 50, norm);
    o.check(std::is_sorted(eps.rbegin(), eps.rend()), "epsilon_K nonincreasing");
  }
}

void c11(Outcome& o) {
  const WindowRun a = window_runs(), b = window_runs();
  bool same = true;
  for (std::size_t i = 0; i < a.est.size(); ++i)
    same = same && a.est[i].hits == b.est[i].hits && a.est[i].estimate == b.est[i].estimate &&
           a.est[i].stderr_ == b.est[i].stderr_;
  o.check(same, "window estimates repeat");
  const auto t1 = survivor_runs(), t2 = survivor_runs();
  for (std::size_t i = 0; i < t1.size(); ++i) {
    o.check(t1[i].P_minus == t2[i].P_minus && t1[i].P_plus == t2[i].P_plus, "tree removal rates repeat");
    o.check(t1[i].levels.back().size() == t2[i].levels.back().size(), "tree shape repeats");
  }
  const CodingScheme cs = uniform_scheme(d11, 2, 6);
  const Tree t = build_tree(cs, 6, [](std::size_t, const IntVec& a, const ChildCell&) { return a[0] != 3; });
  o.check(mass_distribution_check(t, 1000, 5).max_ratio == mass_distribution_check(t, 1000, 5).max_ratio,
          "mass check repeats");
  o.note << "window, survivor trees and mass check rerun with equal seeds";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"constants theta and eta", c1},
      {"window measure law", c2},
      {"multiplicity sum", c3},
      {"scheduler block bounds", c4},
      {"classification fixtures", c5},
      {"fractal dimension bounds", c6},
      {"survivor tree removal rates", c7},
      {"continued fraction oracle", c8},
      {"dynamics identities", c9},
      {"lattice toolbox", c10},
      {"determinism", c11},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("Criterion %zu (%s): %s  %s  (%.2fs)\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.note.str().c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
