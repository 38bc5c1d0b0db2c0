// catgraph: categorical clustering and graphical log-linear model search.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catgraph/dataset.hpp"
#include "catgraph/dpcluster.hpp"
#include "catgraph/error.hpp"
#include "catgraph/oracle.hpp"
#include "catgraph/pipeline.hpp"
#include "catgraph/profiles.hpp"
#include "catgraph/search.hpp"
#include "catgraph/simulate.hpp"
#include "catgraph/tgamma.hpp"

namespace fs = std::filesystem;
using namespace catgraph;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct SimulateArgs {
  std::string preset;
  std::string spec;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string table_out;
  std::string spec_out;
  bool list = false;
};

int run_simulate(const SimulateArgs& a) {
  if (a.list) {
    for (const auto& name : builtin_spec_names()) std::cout << name << '\n';
    return 0;
  }
  if (a.preset.empty() == a.spec.empty()) throw ConfigError("give exactly one of --preset or --spec");
  if (a.out.empty()) throw ConfigError("--out is required");
  GeneratorSpec spec = a.preset.empty() ? read_generator_spec(a.spec) : builtin_spec(a.preset);
  if (a.seed) spec.seed = *a.seed;
  if (a.n) spec.n = *a.n;
  const auto data = generate(spec);
  write_dataset_csv(data, a.out);
  if (!a.table_out.empty()) write_table_csv(build_table(data), a.table_out);
  if (!a.spec_out.empty()) write_generator_spec(spec, a.spec_out);
  std::cout << "wrote " << data.n() << " subjects x " << data.P() << " covariates to " << a.out << '\n';
  return 0;
}

CategoricalDataset load_subjects(const std::string& data, const std::string& table) {
  if (data.empty() == table.empty()) throw ConfigError("give exactly one of --data or --table");
  return data.empty() ? expand_table(read_table_csv(table)) : read_dataset_csv(data).data;
}

ContingencyTable load_table(const std::string& data, const std::string& table) {
  if (data.empty() == table.empty()) throw ConfigError("give exactly one of --data or --table");
  return table.empty() ? build_table(read_dataset_csv(data).data) : read_table_csv(table);
}

struct ClusterArgs {
  std::string data, table, out;
  ChainSettings chain;
  PriorConfig priors;
  bool no_allocations = false;
  bool no_phi = false;
};

int run_cluster(ClusterArgs a) {
  if (a.out.empty()) throw ConfigError("--out is required");
  const auto data = load_subjects(a.data, a.table);
  a.chain.options.record_allocations = !a.no_allocations;
  a.chain.options.record_phi = !a.no_phi;
  const auto trace = run_chain(data, a.priors, a.chain);
  write_trace(trace, a.out);
  std::cout << format_rho_summary(posterior_rho_summary(trace), trace.names);
  return 0;
}

int run_tgamma(const std::string& trace_path, const std::string& out) {
  if (trace_path.empty() || out.empty()) throw ConfigError("--trace and --out are required");
  const auto m = accumulate(read_trace(trace_path));
  write_tgamma_csv(m, out);
  std::ostringstream s;
  s << std::fixed << std::setprecision(3);
  for (std::size_t a = 0; a < m.P; ++a) {
    s << std::setw(6) << m.names[a];
    for (std::size_t b = 0; b < m.P; ++b) {
      if (b <= a) s << std::setw(7) << "";
      else s << std::setw(7) << m(a, b);
    }
    s << '\n';
  }
  std::cout << s.str();
  return 0;
}

struct SearchArgs {
  std::string data, table, tgamma, out;
  std::string strategy = "a", kernel = "marginal";
  SearchConfig config;
  std::size_t runs = 1;
  unsigned threads = 1;
  double prior_scale = 1.0;
  std::string start;
};

int run_search_cmd(SearchArgs a) {
  const auto table = load_table(a.data, a.table);
  a.config.strategy = parse_strategy(a.strategy);
  a.config.kernel = parse_kernel(a.kernel);
  const int P = static_cast<int>(table.levels.size());
  if (!a.start.empty()) a.config.start = parse_model(a.start, P);
  std::optional<TGammaMatrix> tg;
  if (!a.tgamma.empty()) tg = read_tgamma_csv(a.tgamma);
  MarginalCache cache(table, PriorSettings{a.prior_scale}, a.config.kernel == Kernel::ReversibleJump);
  ExperimentOptions opts;
  opts.runs = a.runs;
  opts.threads = a.threads;
  const auto result = run_experiment(cache, tg ? &*tg : nullptr, a.config, opts);
  std::cout << format_experiment(result, table.names);
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    write_experiment_json(result, table.names, a.config, dir / "search.json");
    write_models_csv(result, table.names, dir / "models.csv", 10);
    write_runs_csv(result, dir / "runs.csv");
  }
  return 0;
}

struct OracleArgs {
  std::string theorem;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  bool enumerate = false;
  bool witnesses = false;
  std::string data, table;
  double prior_scale = 1.0;
  std::size_t top = 10;
};

int run_oracle(const OracleArgs& a) {
  int modes = !a.theorem.empty() + a.enumerate + a.witnesses;
  if (modes != 1) throw ConfigError("give exactly one of --theorem, --enumerate, --witnesses");
  std::cout << std::scientific << std::setprecision(3);
  if (!a.theorem.empty()) {
    TheoremCheck r;
    if (a.theorem == "1") r = check_pairwise(a.trials, a.seed);
    else if (a.theorem == "2") r = check_set(a.trials, a.seed);
    else if (a.theorem == "corollary") r = check_corollary(a.trials, a.seed);
    else throw ConfigError("--theorem must be 1, 2 or corollary");
    std::cout << "trials " << r.trials << ", largest independence gap " << r.max_gap;
    if (a.theorem == "1") std::cout << ", largest identity residual " << r.max_identity;
    std::cout << '\n';
    return r.max_gap < 1e-10 && r.max_identity < 1e-12 ? 0 : kExitNumerical;
  }
  if (a.witnesses) {
    const auto parity = parity_witness();
    std::cout << "parity witness: pairwise gaps " << dependence_gap(parity, 0, 1) << ' '
              << dependence_gap(parity, 0, 2) << ' ' << dependence_gap(parity, 1, 2) << ", set gap "
              << set_independence_gap(parity, 0) << '\n';
    const auto flat = flat_profile_witness();
    std::cout << "flat-profile witness: gap " << dependence_gap(flat, 0, 1) << ", gamma product "
              << flat.gamma_product(0, 1) << '\n';
    return 0;
  }
  const auto table = load_table(a.data, a.table);
  const auto post = exhaustive_model_posterior(table, PriorSettings{a.prior_scale});
  std::vector<std::size_t> order(post.graphs.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return post.probability[x] > post.probability[y]; });
  std::cout << std::fixed;
  for (std::size_t k = 0; k < std::min(a.top, order.size()); ++k)
    std::cout << std::setw(4) << k + 1 << "  " << std::left << std::setw(24)
              << describe_model(post.graphs[order[k]], table.names) << std::right << std::setprecision(4)
              << post.probability[order[k]] << "  " << std::setprecision(3) << post.log_marginal[order[k]] << '\n';
  for (const auto& w : post.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int run_report(const std::vector<std::string>& traces, const std::vector<std::string>& searches,
               const std::string& out, const std::string& profile_csv) {
  std::vector<ClusterTrace> loaded;
  for (const auto& t : traces) loaded.push_back(read_trace(t));
  std::vector<ExperimentSummary> summaries;
  for (const auto& s : searches) summaries.push_back(read_experiment_json(s));
  const auto text = build_report(loaded, summaries);
  std::cout << text;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out);
    f << text;
  }
  if (!profile_csv.empty()) {
    if (loaded.empty()) throw ConfigError("--profile-csv needs a trace");
    const auto rep = representative_partition(loaded.front());
    write_profile_csv(profile_table(loaded.front(), rep), profile_csv);
  }
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<double> threshold;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  auto config = read_pipeline_config(a.config);
  if (a.seed) config.seed = *a.seed;
  if (!a.out_dir.empty()) config.output_dir = a.out_dir;
  if (a.threshold) config.rho_threshold = *a.threshold;
  const auto result = run_pipeline(config);
  std::cout << result.report << "manifest: " << result.manifest.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustering-informed search over graphical log-linear models for categorical data"};
  app.require_subcommand(1);
  std::function<int()> action;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from a preset or a generator spec");
  simulate->add_option("--preset", sim.preset, "Built-in generator (see --list)");
  simulate->add_option("--spec", sim.spec, "Generator spec JSON");
  simulate->add_option("--n", sim.n, "Override the number of subjects");
  simulate->add_option("--seed", sim.seed, "Random seed (default: the generator's own)");
  simulate->add_option("--out", sim.out, "Output dataset CSV");
  simulate->add_option("--table-out", sim.table_out, "Also write the contingency table");
  simulate->add_option("--spec-out", sim.spec_out, "Also write the generator spec used");
  simulate->add_flag("--list", sim.list, "List the built-in generators");
  simulate->callback([&] { action = [&] { return run_simulate(sim); }; });

  ClusterArgs cl;
  auto* cluster = app.add_subcommand("cluster", "Run the variable-selection Dirichlet process sampler");
  cluster->add_option("--data", cl.data, "Subject-level CSV");
  cluster->add_option("--table", cl.table, "Counts CSV (expanded to subjects)");
  cluster->add_option("--burnin", cl.chain.burnin, "Burn-in sweeps")->capture_default_str();
  cluster->add_option("--iters", cl.chain.iterations, "Sweeps after burn-in")->capture_default_str();
  cluster->add_option("--thin", cl.chain.thin, "Keep every k-th sweep")->capture_default_str();
  cluster->add_option("--seed", cl.chain.seed, "Random seed");
  cluster->add_option("--out", cl.out, "Trace file");
  cluster->add_option("--lambda", cl.priors.lambda, "Dirichlet hyperparameter")->capture_default_str();
  cluster->add_option("--rho-a", cl.priors.rho_a, "Beta slab shape a")->capture_default_str();
  cluster->add_option("--rho-b", cl.priors.rho_b, "Beta slab shape b")->capture_default_str();
  cluster->add_option("--atom-weight", cl.priors.atom_weight, "Prior P(w = 1)")->capture_default_str();
  cluster->add_option("--alpha-shape", cl.priors.alpha_shape, "Gamma shape for alpha")->capture_default_str();
  cluster->add_option("--alpha-rate", cl.priors.alpha_rate, "Gamma rate for alpha")->capture_default_str();
  cluster->add_option("--max-clusters", cl.priors.max_clusters, "Truncation level")->capture_default_str();
  cluster->add_flag("--no-allocations", cl.no_allocations, "Do not store allocations in the trace");
  cluster->add_flag("--no-phi", cl.no_phi, "Do not store cluster profiles in the trace");
  cluster->callback([&] { action = [&] { return run_cluster(cl); }; });

  std::string tg_trace, tg_out;
  std::uint64_t unused_seed = 0;
  auto* tgamma = app.add_subcommand("tgamma", "Build the co-selection matrix from a trace");
  tgamma->add_option("--trace", tg_trace, "Trace file");
  tgamma->add_option("--out", tg_out, "Matrix CSV");
  tgamma->add_option("--seed", unused_seed, "Accepted for uniformity; the computation is deterministic");
  tgamma->callback([&] { action = [&] { return run_tgamma(tg_trace, tg_out); }; });

  SearchArgs se;
  auto* search = app.add_subcommand("search", "Model-space MCMC over graphical log-linear models");
  search->add_option("--data", se.data, "Subject-level CSV");
  search->add_option("--table", se.table, "Counts CSV");
  search->add_option("--strategy", se.strategy, "a uniform, b cluster-specific, c 30/10 mix, d 20/20 mix")
      ->capture_default_str();
  search->add_option("--tgamma", se.tgamma, "Co-selection matrix CSV (strategies b-d)");
  search->add_option("--kernel", se.kernel, "marginal or rj")->capture_default_str();
  search->add_option("--iters", se.config.iterations, "Iterations after burn-in")->capture_default_str();
  search->add_option("--burnin", se.config.burnin, "Burn-in iterations")->capture_default_str();
  search->add_option("--seed", se.config.seed, "Seed of the first run");
  search->add_option("--runs", se.runs, "Independent runs (seeds seed, seed+1, ...)")->capture_default_str();
  search->add_option("--threads", se.threads, "Worker threads")->capture_default_str();
  search->add_option("--within", se.config.within_fraction, "Fraction of within-model moves")->capture_default_str();
  search->add_option("--epsilon", se.config.epsilon, "Floor on edge proposal weights")->capture_default_str();
  search->add_option("--prior-scale", se.prior_scale, "Scale of the coefficient prior")->capture_default_str();
  search->add_option("--start", se.start, "Start graph, e.g. AB+C");
  search->add_option("--out", se.out, "Output directory for search.json, models.csv, runs.csv");
  search->callback([&] { action = [&] { return run_search_cmd(se); }; });

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Exact checks of the independence results and model enumeration");
  oracle->add_option("--theorem", orc.theorem, "1, 2 or corollary");
  oracle->add_option("--trials", orc.trials, "Random specs to check")->capture_default_str();
  oracle->add_option("--seed", orc.seed, "Random seed");
  oracle->add_flag("--witnesses", orc.witnesses, "Evaluate the converse-failure witnesses");
  oracle->add_flag("--enumerate", orc.enumerate, "Exhaustive model posterior (up to 5 covariates)");
  oracle->add_option("--data", orc.data, "Subject-level CSV");
  oracle->add_option("--table", orc.table, "Counts CSV");
  oracle->add_option("--prior-scale", orc.prior_scale, "Scale of the coefficient prior")->capture_default_str();
  oracle->add_option("--top", orc.top, "Models to print")->capture_default_str();
  oracle->callback([&] { action = [&] { return run_oracle(orc); }; });

  std::vector<std::string> rep_traces, rep_searches;
  std::string rep_out, rep_csv;
  auto* report = app.add_subcommand("report", "Profile, selection and mixing report");
  report->add_option("--trace", rep_traces, "Trace files");
  report->add_option("--search", rep_searches, "search.json summaries");
  report->add_option("--out", rep_out, "Write the text report here too");
  report->add_option("--profile-csv", rep_csv, "Profile table CSV for the first trace");
  report->add_option("--seed", unused_seed, "Accepted for uniformity; the computation is deterministic");
  report->callback([&] { action = [&] { return run_report(rep_traces, rep_searches, rep_out, rep_csv); }; });

  PipelineArgs pl;
  auto* pipeline = app.add_subcommand("pipeline", "simulate -> cluster -> tgamma -> reduce -> search -> report");
  pipeline->add_option("--config", pl.config, "Pipeline JSON")->required();
  pipeline->add_option("--seed", pl.seed, "Override the global seed");
  pipeline->add_option("--out-dir", pl.out_dir, "Override the output directory");
  pipeline->add_option("--rho-threshold", pl.threshold, "Override the covariate reduction threshold");
  pipeline->callback([&] { action = [&] { return run_pipeline_cmd(pl); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    return action ? action() : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
