#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "badapprox/cf_oracle.hpp"
#include "badapprox/core.hpp"
#include "badapprox/dynamics.hpp"
#include "badapprox/fractal.hpp"
#include "badapprox/lattice.hpp"
#include "badapprox/scheduler.hpp"
#include "badapprox/window.hpp"

namespace badapprox::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

// Every violated precondition of a config, reported together.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid config:";
    for (const auto& x : p) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"constants",     "classify",     "window-measure",
                                              "multiplicity-sum", "schedule",  "tree-dimension",
                                              "dani-check",    "hensley-compare", "epsilon-scan"};
  return names;
}

inline const std::vector<std::string>& config_fields() {
  static const std::vector<std::string> f{"experiment", "m",  "n",     "mu",     "nv",      "psi",
                                          "f",          "Q1", "Q2",    "kappa",  "beta",    "depth",
                                          "samples",    "seed", "K",   "Q0",     "out",     "A",
                                          "t",          "t_values", "Q", "tree", "log2_N",  "keep",
                                          "expand_per_node", "child_sample"};
  return f;
}

struct ExperimentConfig {
  std::string experiment;
  Dimensions dims{1, 1};
  std::string mu = "sup", nv = "sup";
  json psi, f;  // descriptors as given
  std::optional<double> Q1, Q2, kappa, beta, Q0, Q, t;
  std::optional<std::uint64_t> depth, samples, seed, expand_per_node, child_sample;
  std::optional<std::int64_t> log2_N, keep;
  std::vector<double> K, A, t_values;
  std::string tree = "survivor";
  std::string out = ".";
  json raw;

  NormSpec mu_spec() const { return NormSpec::parse(mu, dims.m); }
  NormSpec nv_spec() const { return NormSpec::parse(nv, dims.n); }
};

namespace detail {

struct Reader {
  const json& j;
  std::vector<std::string>& errs;

  std::optional<double> num(const std::string& key) const {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number()) {
      errs.push_back("'" + key + "' must be a number");
      return std::nullopt;
    }
    const double v = j[key].get<double>();
    if (!std::isfinite(v)) errs.push_back("'" + key + "' must be finite");
    return v;
  }
  template <class I>
  std::optional<I> integer(const std::string& key, I lo) const {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_number_integer()) {
      errs.push_back("'" + key + "' must be an integer");
      return std::nullopt;
    }
    if (j[key].is_number_unsigned()) {
      const auto u = j[key].get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<I>::max())) {
        errs.push_back("'" + key + "' is too large");
        return std::nullopt;
      }
      return static_cast<I>(u);
    }
    const auto v = j[key].get<std::int64_t>();
    if (v < static_cast<std::int64_t>(lo)) {
      errs.push_back("'" + key + "' must be at least " + std::to_string(lo));
      return std::nullopt;
    }
    return static_cast<I>(v);
  }
  std::optional<std::string> str(const std::string& key) const {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) {
      errs.push_back("'" + key + "' must be a string");
      return std::nullopt;
    }
    return j[key].get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, bool allow_scalar) const {
    std::vector<double> v;
    if (!j.contains(key)) return v;
    if (allow_scalar && j[key].is_number()) return {j[key].get<double>()};
    if (!j[key].is_array()) {
      errs.push_back("'" + key + "' must be an array of numbers");
      return v;
    }
    for (const auto& x : j[key]) {
      if (!x.is_number()) {
        errs.push_back("'" + key + "' must be an array of numbers");
        return {};
      }
      v.push_back(x.get<double>());
    }
    return v;
  }
};

inline void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where,
                       std::vector<std::string>& errs) {
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      errs.push_back("unknown field '" + k + "'" + where);
}

}  // namespace detail

inline ApproxFunction make_psi(const ExperimentConfig& c) {
  if (c.psi.is_null()) {
    require(c.kappa.has_value(), "psi or kappa is required");
    return ApproxFunction::power_law(c.dims, *c.kappa);
  }
  const std::string fam = c.psi.at("family").get<std::string>();
  if (fam == "power_law") return ApproxFunction::power_law(c.dims, c.psi.at("kappa").get<double>());
  if (fam == "log_corrected") return ApproxFunction::log_corrected(c.dims, c.psi.at("gamma").get<double>());
  std::vector<std::pair<double, double>> s;
  for (const auto& row : c.psi.at("samples")) s.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
  return ApproxFunction::tabulated(c.dims, s);
}

inline DimFunction make_f(const ExperimentConfig& c) {
  const std::string fam = c.f.at("family").get<std::string>();
  if (fam == "power") return DimFunction::power(c.dims, c.f.at("s").get<double>());
  if (fam == "log_power") return DimFunction::log_power(c.dims, c.f.at("s").get<double>());
  return DimFunction::corollary(make_psi(c), c.f.at("rho0").get<double>());
}

namespace detail {

inline void check_psi_descriptor(const json& p, std::vector<std::string>& errs) {
  if (!p.is_object() || !p.contains("family") || !p["family"].is_string()) {
    errs.push_back("'psi' must be an object with a string 'family'");
    return;
  }
  const std::string fam = p["family"].get<std::string>();
  if (fam == "power_law") {
    check_keys(p, {"family", "kappa"}, " in psi", errs);
    if (!p.contains("kappa") || !p["kappa"].is_number() || p["kappa"].get<double>() < 0)
      errs.push_back("psi.kappa must be a number >= 0");
  } else if (fam == "log_corrected") {
    check_keys(p, {"family", "gamma"}, " in psi", errs);
    if (!p.contains("gamma") || !p["gamma"].is_number() || !(p["gamma"].get<double>() > 0))
      errs.push_back("psi.gamma must be a number > 0");
  } else if (fam == "tabulated") {
    check_keys(p, {"family", "samples"}, " in psi", errs);
    bool ok = p.contains("samples") && p["samples"].is_array() && p["samples"].size() >= 2;
    if (ok)
      for (const auto& r : p["samples"]) ok = ok && r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number();
    if (!ok) errs.push_back("psi.samples must be an array of at least two [q, psi(q)] pairs");
  } else {
    errs.push_back("unknown psi family '" + fam + "' (power_law, log_corrected, tabulated)");
  }
}

inline void check_f_descriptor(const json& f, std::vector<std::string>& errs) {
  if (!f.is_object() || !f.contains("family") || !f["family"].is_string()) {
    errs.push_back("'f' must be an object with a string 'family'");
    return;
  }
  const std::string fam = f["family"].get<std::string>();
  if (fam == "power" || fam == "log_power") {
    check_keys(f, {"family", "s"}, " in f", errs);
    if (!f.contains("s") || !f["s"].is_number() || !(f["s"].get<double>() > 0)) errs.push_back("f.s must be a number > 0");
  } else if (fam == "corollary") {
    check_keys(f, {"family", "rho0"}, " in f", errs);
    if (!f.contains("rho0") || !f["rho0"].is_number()) errs.push_back("f.rho0 must be a number");
  } else {
    errs.push_back("unknown f family '" + fam + "' (power, log_power, corollary)");
  }
}

inline bool stochastic(const ExperimentConfig& c) {
  return c.experiment == "window-measure" || c.experiment == "tree-dimension";
}

}  // namespace detail

// Strict parse: unknown fields, type errors and violated preconditions are
// all collected before anything runs.
inline ExperimentConfig parse_config(const json& j) {
  std::vector<std::string> errs;
  ExperimentConfig c;
  if (!j.is_object()) throw ValidationError({"config must be a JSON object"});
  c.raw = j;
  detail::check_keys(j, config_fields(), "", errs);
  const detail::Reader r{j, errs};
  if (auto e = r.str("experiment")) c.experiment = *e;
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    errs.push_back("'experiment' must be one of constants, classify, window-measure, multiplicity-sum, schedule, "
                   "tree-dimension, dani-check, hensley-compare, epsilon-scan");
  const int m = r.integer<int>("m", 1).value_or(1), n = r.integer<int>("n", 1).value_or(1);
  c.dims = Dimensions(m, n);
  if (c.dims.d() > kMaxLatticeDim) errs.push_back("m + n must be at most 8");
  if (auto s = r.str("mu")) c.mu = *s;
  if (auto s = r.str("nv")) c.nv = *s;
  for (const auto& [name, text, dim] : {std::tuple{"mu", c.mu, m}, std::tuple{"nv", c.nv, n}}) {
    try {
      NormSpec::parse(text, dim);
    } catch (const std::exception& e) {
      errs.push_back(std::string("'") + name + "': " + e.what());
    }
  }
  if (j.contains("psi")) {
    c.psi = j["psi"];
    detail::check_psi_descriptor(c.psi, errs);
  }
  if (j.contains("f")) {
    c.f = j["f"];
    detail::check_f_descriptor(c.f, errs);
  }
  c.Q1 = r.num("Q1");
  c.Q2 = r.num("Q2");
  c.kappa = r.num("kappa");
  c.beta = r.num("beta");
  c.Q0 = r.num("Q0");
  c.Q = r.num("Q");
  c.t = r.num("t");
  c.depth = r.integer<std::uint64_t>("depth", 1);
  c.samples = r.integer<std::uint64_t>("samples", 1);
  c.seed = r.integer<std::uint64_t>("seed", 0);
  c.expand_per_node = r.integer<std::uint64_t>("expand_per_node", 0);
  c.child_sample = r.integer<std::uint64_t>("child_sample", 1);
  c.log2_N = r.integer<std::int64_t>("log2_N", 1);
  c.keep = r.integer<std::int64_t>("keep", 1);
  c.K = r.numbers("K", true);
  c.A = r.numbers("A", false);
  c.t_values = r.numbers("t_values", false);
  if (auto s = r.str("tree")) c.tree = *s;
  if (auto s = r.str("out")) c.out = *s;

  if (c.kappa && *c.kappa < 0) errs.push_back("'kappa' must be >= 0");
  if (c.kappa && c.psi.is_object() && c.psi.value("family", "") == "power_law" && c.psi.contains("kappa") &&
      c.psi["kappa"].is_number() && c.psi["kappa"].get<double>() != *c.kappa)
    errs.push_back("'kappa' disagrees with psi.kappa");
  if (c.Q1 && *c.Q1 < 1) errs.push_back("'Q1' must be at least 1");
  if (c.Q1 && c.Q2 && *c.Q2 < *c.Q1) errs.push_back("'Q2' must be at least Q1");
  if (c.beta && !(*c.beta > 0)) errs.push_back("'beta' must be positive");
  if (c.Q0 && *c.Q0 < 1) errs.push_back("'Q0' must be at least 1");
  if (!c.A.empty() && static_cast<int>(c.A.size()) != c.dims.D()) errs.push_back("'A' must have m*n entries");
  for (double k : c.K)
    if (k < 1) errs.push_back("'K' values must be at least 1");

  auto need = [&](bool present, const std::string& what) {
    if (!present) errs.push_back(c.experiment + " needs '" + what + "'");
  };
  const bool has_psi = !c.psi.is_null() || c.kappa.has_value();
  const std::string& e = c.experiment;
  if (detail::stochastic(c)) need(c.seed.has_value(), "seed");
  if (e == "classify") {
    need(has_psi, "psi");
    need(!c.f.is_null(), "f");
  } else if (e == "window-measure" || e == "multiplicity-sum") {
    need(has_psi, "psi");
    need(c.Q1.has_value(), "Q1");
    need(c.Q2.has_value(), "Q2");
    if (e == "window-measure") need(c.samples.has_value(), "samples");
    if (e == "multiplicity-sum" && c.mu != "sup" && c.mu != "linf") errs.push_back("multiplicity-sum needs mu = sup");
  } else if (e == "schedule") {
    need(has_psi, "psi");
    need(c.beta.has_value(), "beta");
    need(c.depth.has_value(), "depth");
  } else if (e == "tree-dimension") {
    need(c.depth.has_value(), "depth");
    need(!c.f.is_null(), "f");
    if (c.tree == "constant") {
      need(c.log2_N.has_value(), "log2_N");
      need(c.keep.has_value(), "keep");
      if (c.log2_N && c.keep && c.dims.D() * *c.log2_N <= 16 && *c.keep > (std::int64_t{1} << (c.dims.D() * *c.log2_N)))
        errs.push_back("'keep' exceeds the number of letters");
      if (c.log2_N && c.dims.D() * *c.log2_N > 16) errs.push_back("constant trees need N^D <= 2^16");
    } else if (c.tree == "survivor" || c.tree == "avoidance") {
      need(has_psi, "psi");
      need(c.beta.has_value(), "beta");
      if (c.dims.m * c.dims.n > 1 && c.mu != "sup" && c.mu != "linf") errs.push_back("cell tests for D > 1 need mu = sup");
    } else {
      errs.push_back("'tree' must be constant, survivor or avoidance");
    }
  } else if (e == "dani-check") {
    need(has_psi, "psi");
    need(!c.A.empty(), "A");
    need(!c.t_values.empty(), "t_values");
  } else if (e == "hensley-compare") {
    need(c.kappa.has_value() || (c.psi.is_object() && c.psi.value("family", "") == "power_law"), "kappa");
    if (c.dims.m != 1 || c.dims.n != 1) errs.push_back("hensley-compare needs m = n = 1");
  } else if (e == "epsilon-scan") {
    need(!c.K.empty(), "K");
    need(c.Q.has_value(), "Q");
  }
  if (!errs.empty()) throw ValidationError(errs);
  return c;
}

struct RunRecord {
  json config;
  std::string timestamp;
  std::string version = kVersion;
  json results = json::object();
  json regime = json::object();
  std::vector<std::string> summary;  // human-readable lines

  json to_json() const {
    return json{{"config", config}, {"timestamp", timestamp}, {"version", version}, {"results", results}, {"regime", regime}};
  }
};

namespace detail {

inline std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + json(v[i]).dump();
  return s;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline Matrix matrix_or_zero(const ExperimentConfig& c) { return c.A.empty() ? Matrix(c.dims.D(), 0.0) : c.A; }

inline void run_constants(const ExperimentConfig& c, RunRecord& r) {
  const NormSpec mu = c.mu_spec(), nv = c.nv_spec();
  r.results["theta"] = theta(c.dims, mu, nv);
  r.results["eta"] = eta(c.dims, mu, nv);
  r.results["eta_over_theta"] = eta(c.dims, mu, nv) / theta(c.dims, mu, nv);
  r.summary.push_back("theta = " + fmt(r.results["theta"]) + ", eta = " + fmt(r.results["eta"]) +
                      " (expected eta = 2 theta for m = n = 1 sup/sup)");
}

inline void run_classify(const ExperimentConfig& c, RunRecord& r) {
  const ApproxFunction psi = make_psi(c);
  const DimFunction f = make_f(c);
  const Classification cl = classify(f, psi, c.dims, c.mu_spec(), c.nv_spec());
  r.results["psi"] = psi.describe();
  r.results["f"] = f.describe();
  r.results["verdict"] = to_string(cl.verdict);
  r.results["L"] = cl.L_value;
  r.results["L_error"] = cl.L_error;
  r.results["eta"] = cl.eta_value;
  r.results["analytic"] = cl.analytic;
  r.results["anchor"] = "measure trichotomy: L < eta gives zero, L > eta gives infinity";
  r.summary.push_back("verdict " + to_string(cl.verdict) + ": L = " + fmt(cl.L_value) + " vs eta = " + fmt(cl.eta_value));
}

inline void run_window(const ExperimentConfig& c, RunRecord& r) {
  const ApproxFunction psi = make_psi(c);
  const WindowReport w = window_report(psi, *c.Q1, *c.Q2, c.mu_spec(), c.nv_spec(), *c.samples, *c.seed);
  r.results["estimate"] = w.mc.estimate;
  r.results["stderr"] = w.mc.stderr_;
  r.results["hits"] = w.mc.hits;
  r.results["samples"] = w.mc.samples;
  r.results["F_psi"] = w.F;
  r.results["eta"] = w.eta;
  r.results["prediction"] = w.prediction;
  r.results["ratio"] = w.ratio;
  r.results["multiplicity_sum"] = w.multiplicity_sum;
  r.results["regime"] = to_string(w.regime);
  r.results["anchor"] = "window measure law 1 - exp(-eta F)";
  r.regime["window"] = to_string(w.regime);
  r.summary.push_back("estimate " + fmt(w.mc.estimate) + " +- " + fmt(w.mc.stderr_) + " vs prediction " +
                      fmt(w.prediction) + " (ratio " + fmt(w.ratio) + ", " + to_string(w.regime) + ")");
}

inline void run_multiplicity(const ExperimentConfig& c, RunRecord& r) {
  const ApproxFunction psi = make_psi(c);
  const double s = sum_with_multiplicity(psi, *c.Q1, *c.Q2, c.mu_spec(), c.nv_spec());
  const double F = psi.F(*c.Q1, *c.Q2), e = eta(c.dims, c.mu_spec(), c.nv_spec());
  r.results["sum"] = s;
  r.results["F_psi"] = F;
  r.results["eta"] = e;
  r.results["eta_F"] = e * F;
  r.results["rel_error"] = std::abs(s - e * F) / (e * F);
  r.results["anchor"] = "primitive slab measures sum to eta F";
  r.summary.push_back("sum " + fmt(s) + " vs prediction eta F = " + fmt(e * F));
}

inline void run_schedule(const ExperimentConfig& c, RunRecord& r) {
  const ApproxFunction psi = make_psi(c);
  const Schedule s = build_schedule(psi, *c.beta, c.dims.alpha(), *c.depth);
  const BlockCheck b = check_block_bounds(s);
  std::vector<double> ex(s.exponents.begin(), s.exponents.end());
  r.results["levels"] = s.size();
  r.results["exponents"] = join(ex);
  r.results["log2_NK"] = s.log2_prod.back();
  r.results["bounds_ok"] = b.ok;
  r.results["worst_lower"] = b.worst_lower;
  r.results["worst_upper"] = b.worst_upper;
  if (psi.family() == ApproxFunction::Family::power_law) {
    const std::int64_t l = constant_exponent(psi.parameter(), *c.beta, c.dims.alpha());
    r.results["constant_exponent"] = l;
    r.results["matches_constant"] =
        std::all_of(s.exponents.begin(), s.exponents.end(), [&](std::int64_t x) { return x == l; });
    r.summary.push_back("exponent l_k = " + std::to_string(s.exponents.front()) + " vs closed form " + std::to_string(l));
  }
  r.results["anchor"] = "block condition beta <= F(Q^k, Q^{k+1}) <= beta + slack";
  r.summary.push_back(std::string("block bounds ") + (b.ok ? "hold" : "FAIL") + " on " + std::to_string(s.size()) +
                      " levels");
}

inline void run_tree(const ExperimentConfig& c, RunRecord& r) {
  const std::size_t depth = *c.depth;
  const NormSpec mu = c.mu_spec(), nv = c.nv_spec();
  TreeOptions opt;
  opt.seed = *c.seed;
  if (c.expand_per_node) opt.expand_per_node = *c.expand_per_node;
  if (c.child_sample) opt.child_sample = *c.child_sample;
  Tree t;
  if (c.tree == "constant") {
    const CodingScheme cs = uniform_scheme(c.dims, *c.log2_N, depth);
    const std::int64_t l = *c.log2_N, keep = *c.keep;
    t = build_tree(cs, depth, [l, keep](std::size_t, const IntVec& a, const ChildCell&) {
      std::int64_t idx = 0;
      for (std::size_t i = 0; i < a.size(); ++i) idx |= a[i] << (l * static_cast<std::int64_t>(i));
      return idx < keep;
    }, opt);
    t.variant = "constant";
  } else {
    const ApproxFunction psi = make_psi(c);
    const CodingScheme cs{build_schedule(psi, *c.beta, c.dims.alpha(), depth), c.dims};
    const double Q0 = c.Q0.value_or(1.0);
    t = c.tree == "survivor" ? build_survivor_tree(psi, Q0, cs, depth, mu, nv, opt)
                             : build_avoidance_tree(psi, Q0, cs, depth, mu, nv, opt);
    r.results["eta_beta"] = eta(c.dims, mu, nv) * *c.beta;
    r.results["anchor"] = "per-level removal fraction against eta beta";
  }
  r.results["variant"] = t.variant;
  r.results["P_minus"] = join(t.P_minus);
  r.results["P_plus"] = join(t.P_plus);
  r.results["sampled"] = t.sampled;
  r.results["truncated"] = t.truncated;
  r.results["died"] = t.died;
  r.results["deepest_nodes"] = t.levels.back().size();
  r.regime["tree"] = t.died ? "died" : t.truncated ? "truncated" : t.sampled ? "sampled" : "exhaustive";
  if (!t.died && t.depth() >= 2) {
    const DimensionBounds b = dimension_bounds(t, make_f(c));
    r.results["s_lower"] = b.s_lower;
    r.results["s_upper"] = b.s_upper;
    r.results["lower_available"] = b.lower_available;
    r.results["lower_flag"] = b.lower_flag;
    r.results["upper_flag"] = b.upper_flag;
    r.results["hausdorff_lower"] = b.hausdorff_lower;
    r.results["box_upper"] = b.box_upper;
    // the natural measure matches f_+ only when every kept child was expanded
    if (t.levels.back().size() <= 200000 && !t.sampled && !t.truncated && !c.expand_per_node) {
      r.results["mass_max_ratio"] = mass_distribution_check(t, 1000, *c.seed).max_ratio;
      const double rho = std::ldexp(1.0, -static_cast<int>(t.scheme.log2_N_prod(t.depth() - 1)) - 1);
      r.results["box_count"] = box_count(t, rho);
    }
    r.summary.push_back("exponents: lower " + fmt(b.s_lower) + ", upper " + fmt(b.s_upper));
  }
  r.summary.push_back("P_k^- = " + join(t.P_minus) + (r.results.contains("eta_beta") ? " vs eta beta = " +
                      fmt(r.results["eta_beta"]) : std::string()));
}

inline void run_dani(const ExperimentConfig& c, RunRecord& r) {
  const ApproxFunction psi = make_psi(c);
  const DaniReport d = dani_check(c.A, psi, c.t_values, c.mu_spec(), c.nv_spec());
  std::size_t exc = 0, hits = 0;
  for (const auto& row : d.rows) exc += row.excursion, hits += row.hit;
  r.results["rows"] = d.rows.size();
  r.results["excursions"] = exc;
  r.results["hits"] = hits;
  r.results["agreement"] = d.agreement;
  r.results["violations"] = d.violations;
  r.results["horizon"] = d.horizon;
  r.results["anchor"] = "excursion above r_psi forces an approximation in [1, Q_t]";
  r.summary.push_back("agreement " + fmt(d.agreement) + ", violations " + std::to_string(d.violations) + " (expected 0)");
}

inline void run_hensley(const ExperimentConfig& c, RunRecord& r) {
  const double kappa = c.kappa ? *c.kappa : c.psi.at("kappa").get<double>();
  const HensleyValue h = hensley_dim(kappa);
  const auto [lo, hi] = kurzweil_band(kappa);
  const double th = theta(c.dims, c.mu_spec(), c.nv_spec());
  r.results["kappa"] = kappa;
  r.results["hensley"] = h.value;
  r.results["outside_guard"] = h.outside_guard;
  r.results["kurzweil_lo"] = lo;
  r.results["kurzweil_hi"] = hi;
  r.results["in_band"] = h.value >= lo && h.value <= hi;
  r.results["first_order"] = 1 - th * kappa;
  r.results["moreira_threshold"] = moreira_threshold().value;
  r.results["anchor"] = "dim Bad_kappa = 1 - theta kappa + O(kappa^2 log)";
  r.regime["hensley"] = h.outside_guard ? "outside-guard" : "guarded";
  r.summary.push_back("hensley " + fmt(h.value) + " in [" + fmt(lo) + ", " + fmt(hi) + "], first order " +
                      fmt(1 - th * kappa));
}

inline void run_epsilon(const ExperimentConfig& c, RunRecord& r) {
  const Lattice L = flow_lattice(matrix_or_zero(c), c.t.value_or(0.0), c.dims);
  const LatticeNorm norm = LatticeNorm::mixed(c.dims, c.mu_spec(), c.nv_spec());
  std::vector<double> Ks = c.K;
  std::sort(Ks.begin(), Ks.end());
  const std::vector<double> eps = epsilon_K_profile(L, Ks, *c.Q, norm);
  r.results["K"] = join(Ks);
  r.results["epsilon"] = join(eps);
  r.results["irr_lattice"] = lattice_irregularity(L, norm);
  r.results["nonincreasing"] = std::is_sorted(eps.rbegin(), eps.rend());
  r.results["anchor"] = "irregular vectors thin out as K grows";
  r.summary.push_back("epsilon_K = " + join(eps));
}

}  // namespace detail

// Runs a validated config.  The result payload depends only on the config.
inline RunRecord run(const ExperimentConfig& c) {
  RunRecord r;
  r.config = c.raw;
  r.timestamp = detail::now_iso();
  const std::string& e = c.experiment;
  if (e == "constants") detail::run_constants(c, r);
  else if (e == "classify") detail::run_classify(c, r);
  else if (e == "window-measure") detail::run_window(c, r);
  else if (e == "multiplicity-sum") detail::run_multiplicity(c, r);
  else if (e == "schedule") detail::run_schedule(c, r);
  else if (e == "tree-dimension") detail::run_tree(c, r);
  else if (e == "dani-check") detail::run_dani(c, r);
  else if (e == "hensley-compare") detail::run_hensley(c, r);
  else if (e == "epsilon-scan") detail::run_epsilon(c, r);
  if (detail::stochastic(c)) r.results["seed"] = *c.seed;
  return r;
}

// ---- tabular output ----

inline std::string kappa_or_family(const json& cfg) {
  if (cfg.contains("psi")) {
    const json& p = cfg["psi"];
    if (p.value("family", "") == "power_law" && p.contains("kappa")) return p["kappa"].dump();
    return p.value("family", "");
  }
  if (cfg.contains("kappa")) return cfg["kappa"].dump();
  return "";
}

inline std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();  // shortest round-trip form for floats
}

// Fixed leading columns, then the experiment's results in the order they are produced.
inline std::vector<std::string> csv_columns(const RunRecord& r) {
  const std::string e = r.config.value("experiment", "");
  if (e == "window-measure")
    return {"m", "n", "mu", "nv", "kappa_or_family", "Q1", "Q2", "samples", "seed", "estimate", "stderr",
            "F_psi", "eta", "prediction", "ratio", "regime"};
  std::vector<std::string> cols{"m", "n", "mu", "nv", "kappa_or_family"};
  for (const auto& [k, v] : r.results.items())
    if (k != "anchor" && std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  return cols;
}

inline json column_value(const RunRecord& r, const std::string& col) {
  if (col == "kappa_or_family") return kappa_or_family(r.config);
  if (r.results.contains(col)) return r.results[col];
  if (col == "m" || col == "n") return r.config.value(col, 1);
  if (col == "mu" || col == "nv") return r.config.value(col, std::string("sup"));
  if (r.config.contains(col)) return r.config[col];
  return nullptr;
}

inline std::string csv_row(const RunRecord& r, const std::vector<std::string>& cols) {
  std::string s;
  for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + csv_cell(column_value(r, cols[i]));
  return s;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_record(const RunRecord& r, const std::filesystem::path& dir, const std::string& stem) {
  const auto cols = csv_columns(r);
  std::string csv;
  for (std::size_t i = 0; i < cols.size(); ++i) csv += (i ? "," : "") + cols[i];
  csv += "\n" + csv_row(r, cols) + "\n";
  write_atomic(dir / (stem + ".csv"), csv);
  write_atomic(dir / (stem + ".json"), r.to_json().dump(2) + "\n");
}

// ---- sweeps ----

struct SweepRow {
  double value = 0.0;
  std::optional<RunRecord> record;
  std::string error;
};

inline bool template_has(const json& t, const std::string& param) {
  if (t.contains(param)) return true;
  return param == "kappa" && t.contains("psi") && t["psi"].value("family", "") == "power_law";
}

inline json with_param(json t, const std::string& param, double v) {
  const bool integral = std::floor(v) == v && std::abs(v) < 9e15;
  const json val = integral && t.contains(param) && t[param].is_number_integer() ? json(static_cast<std::int64_t>(v)) : json(v);
  if (param == "kappa" && t.contains("psi") && t["psi"].value("family", "") == "power_law") {
    t["psi"]["kappa"] = val;
    if (t.contains("kappa")) t["kappa"] = val;
  } else {
    t[param] = val;
  }
  return t;
}

// One record per value; failures are kept per row and do not stop the sweep.
// Rows may run on several threads; the table is assembled in parameter order.
inline std::vector<SweepRow> sweep(const json& tmpl, const std::string& param, const std::vector<double>& values,
                                   unsigned jobs = 1) {
  if (!template_has(tmpl, param)) throw ValidationError({"sweep parameter '" + param + "' is not in the template"});
  std::vector<SweepRow> rows(values.size());
  auto work = [&](std::size_t i) {
    rows[i].value = values[i];
    try {
      rows[i].record = run(parse_config(with_param(tmpl, param, values[i])));
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(values.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < values.size();) work(i);
      });
    for (auto& th : pool) th.join();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });
  return rows;
}

inline std::string sweep_table(const std::vector<SweepRow>& rows, const std::string& param) {
  std::vector<std::string> cols;
  for (const auto& r : rows)
    if (r.record) {
      cols = csv_columns(*r.record);
      break;
    }
  std::string s = param;
  for (const auto& c : cols) s += "," + c;
  s += ",error\n";
  for (const auto& r : rows) {
    s += csv_cell(json(r.value));
    if (r.record) s += "," + csv_row(*r.record, cols);
    else s += std::string(cols.size(), ',');
    s += "," + csv_cell(json(r.error)) + "\n";
  }
  return s;
}

}  // namespace badapprox::cli
