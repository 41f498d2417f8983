#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "badapprox/experiment.hpp"

using namespace badapprox;
using cli::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitBudget = 3;

const char* kFooter = R"(
Config: a JSON object with fields experiment, m, n, mu, nv, psi, f, Q1, Q2,
kappa, beta, depth, samples, seed, K, Q0, out, plus A, t, t_values, Q, tree,
log2_N, keep, expand_per_node, child_sample.  Unknown fields are rejected.
  psi: {"family":"power_law","kappa":k} | {"family":"log_corrected","gamma":g}
       | {"family":"tabulated","samples":[[q,psi],...]}
  f:   {"family":"power","s":s} | {"family":"log_power","s":s} | {"family":"corollary","rho0":r}

Output: <out>/<experiment>.csv and <out>/<experiment>.json (written atomically).
CSV columns for window-measure:
  m,n,mu,nv,kappa_or_family,Q1,Q2,samples,seed,estimate,stderr,F_psi,eta,prediction,ratio,regime
Other experiments: m,n,mu,nv,kappa_or_family followed by the result keys listed in README.md.
Sweeps: <out>/sweep_<experiment>_<param>.csv (sorted by the parameter) plus one JSON per row.

Exit codes: 0 success, 2 validation error, 3 budget exceeded.)";

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw cli::ValidationError({"cannot read config '" + path + "'"});
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw cli::ValidationError({std::string("config is not valid JSON: ") + e.what()});
  }
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw cli::ValidationError({"sweep value '" + item + "' is not a number"});
    v.push_back(x);
  }
  return v;
}

json prepare(json cfg, const std::string& experiment, std::optional<std::uint64_t> seed, const std::string& out) {
  if (!cfg.is_object()) throw cli::ValidationError({"config must be a JSON object"});
  if (cfg.contains("experiment") && cfg["experiment"] != experiment)
    throw cli::ValidationError({"config experiment " + cfg["experiment"].dump() + " differs from '" + experiment + "'"});
  cfg["experiment"] = experiment;
  if (seed) cfg["seed"] = *seed;
  if (!out.empty()) cfg["out"] = out;
  return cfg;
}

int run_one(const std::string& experiment, const std::string& config, std::optional<std::uint64_t> seed,
            const std::string& out) {
  const json cfg = prepare(load_json(config), experiment, seed, out);
  const cli::ExperimentConfig c = cli::parse_config(cfg);
  const cli::RunRecord r = cli::run(c);
  cli::write_record(r, c.out, experiment);
  std::cout << experiment << ":\n";
  for (const auto& line : r.summary) std::cout << "  " << line << "\n";
  std::cout << "  record: " << (std::filesystem::path(c.out) / (experiment + ".json")).string() << "\n";
  return 0;
}

int run_sweep(const std::string& config, const std::string& param, const std::string& values,
              std::optional<std::uint64_t> seed, const std::string& out, unsigned jobs) {
  json tmpl = load_json(config);
  if (!tmpl.is_object() || !tmpl.contains("experiment"))
    throw cli::ValidationError({"sweep template needs an 'experiment' field"});
  tmpl = prepare(tmpl, tmpl["experiment"].get<std::string>(), seed, out);
  const std::string experiment = tmpl["experiment"];
  const std::filesystem::path dir = tmpl.value("out", std::string("."));
  const auto rows = cli::sweep(tmpl, param, parse_values(values), jobs);
  const std::string stem = "sweep_" + experiment + "_" + param;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json row{{"param", param}, {"value", rows[i].value}};
    if (rows[i].record) row["record"] = rows[i].record->to_json();
    else row["error"] = rows[i].error;
    cli::write_atomic(dir / (stem + "_" + std::to_string(i) + ".json"), row.dump(2) + "\n");
  }
  const std::string table = cli::sweep_table(rows, param);
  cli::write_atomic(dir / (stem + ".csv"), table);
  std::cout << table;
  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.record;
  if (failed) std::cerr << failed << " of " << rows.size() << " rows failed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Badly approximable matrices: experiment runner"};
  app.footer(kFooter);
  app.require_subcommand(1);
  std::string config, out, param, values;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string chosen;
  for (const auto& name : cli::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config, "JSON config")->required();
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", out, "output directory");
    sub->callback([&chosen, name] { chosen = name; });
  }
  auto* sw = app.add_subcommand("sweep", "run a config template over a list of parameter values");
  sw->add_option("--config", config, "JSON template")->required();
  sw->add_option("--param", param, "template field to vary")->required();
  sw->add_option("--values", values, "comma-separated values")->required();
  sw->add_option("--seed", seed, "overrides the template seed");
  sw->add_option("--out", out, "output directory");
  sw->add_option("--jobs", jobs, "rows run concurrently")->check(CLI::Range(1u, 256u));
  sw->callback([&chosen] { chosen = "sweep"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  try {
    if (chosen == "sweep") return run_sweep(config, param, values, seed, out, jobs);
    return run_one(chosen, config, seed, out);
  } catch (const cli::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  } catch (const BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << " (required " << e.required() << ")\n";
    return kExitBudget;
  } catch (const std::overflow_error& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kExitBudget;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
