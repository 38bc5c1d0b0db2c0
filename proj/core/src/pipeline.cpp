#include "catgraph/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "catgraph/error.hpp"
#include "catgraph/simulate.hpp"
#include "catgraph/tgamma.hpp"
#include "csv.hpp"

namespace catgraph {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const ConfigError& e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage " + name + ": " + e.what());
  }
}

std::string log2_space(std::size_t h) { return "2^" + std::to_string(h); }

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    const json doc = json::parse(json_text);
    check_keys(doc, {"seed", "output_dir", "data", "cluster", "rho_threshold", "search"}, "pipeline config");
    read_if(doc, "seed", c.seed);
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    read_if(doc, "rho_threshold", c.rho_threshold);

    if (!doc.contains("data")) throw ConfigError("pipeline config needs a data section");
    const json& d = doc.at("data");
    check_keys(d, {"preset", "generator", "dataset", "table", "n"}, "data");
    int sources = 0;
    if (d.contains("preset")) {
      c.data.kind = DataSource::Kind::Preset;
      c.data.value = d.at("preset").get<std::string>();
      ++sources;
    }
    if (d.contains("generator")) {
      c.data.kind = DataSource::Kind::GeneratorFile;
      c.data.value = resolve(base_dir, d.at("generator").get<std::string>()).string();
      ++sources;
    }
    if (d.contains("dataset")) {
      c.data.kind = DataSource::Kind::DatasetCsv;
      c.data.value = resolve(base_dir, d.at("dataset").get<std::string>()).string();
      ++sources;
    }
    if (d.contains("table")) {
      c.data.kind = DataSource::Kind::TableCsv;
      c.data.value = resolve(base_dir, d.at("table").get<std::string>()).string();
      ++sources;
    }
    if (sources != 1) throw ConfigError("data section needs exactly one of preset, generator, dataset, table");
    if (d.contains("n")) c.data.n = d.at("n").get<std::size_t>();

    if (doc.contains("cluster")) {
      const json& k = doc.at("cluster");
      check_keys(k, {"burnin", "iterations", "thin", "max_representative_draws", "priors"}, "cluster");
      read_if(k, "burnin", c.cluster.burnin);
      read_if(k, "iterations", c.cluster.iterations);
      read_if(k, "thin", c.cluster.thin);
      read_if(k, "max_representative_draws", c.cluster.max_representative_draws);
      if (k.contains("priors")) {
        const json& p = k.at("priors");
        check_keys(p, {"lambda", "rho_a", "rho_b", "atom_weight", "alpha_shape", "alpha_rate", "max_clusters",
                       "initial_groups"},
                   "priors");
        auto& pr = c.cluster.priors;
        read_if(p, "lambda", pr.lambda);
        read_if(p, "rho_a", pr.rho_a);
        read_if(p, "rho_b", pr.rho_b);
        read_if(p, "atom_weight", pr.atom_weight);
        read_if(p, "alpha_shape", pr.alpha_shape);
        read_if(p, "alpha_rate", pr.alpha_rate);
        read_if(p, "max_clusters", pr.max_clusters);
        read_if(p, "initial_groups", pr.initial_groups);
      }
    }
    if (doc.contains("search")) {
      const json& s = doc.at("search");
      check_keys(s, {"strategy", "kernel", "iterations", "burnin", "runs", "threads", "within_fraction", "epsilon",
                     "prior_scale"},
                 "search");
      auto& sc = c.search.search;
      if (s.contains("strategy")) sc.strategy = parse_strategy(s.at("strategy").get<std::string>());
      if (s.contains("kernel")) sc.kernel = parse_kernel(s.at("kernel").get<std::string>());
      read_if(s, "iterations", sc.iterations);
      read_if(s, "burnin", sc.burnin);
      read_if(s, "within_fraction", sc.within_fraction);
      read_if(s, "epsilon", sc.epsilon);
      read_if(s, "runs", c.search.runs);
      read_if(s, "threads", c.search.threads);
      read_if(s, "prior_scale", c.search.prior.scale);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad pipeline config: ") + e.what());
  }
  c.cluster.priors.validate();
  if (c.cluster.iterations < 1) throw ConfigError("cluster iterations must be at least 1");
  if (c.cluster.thin < 1) throw ConfigError("cluster thin must be at least 1");
  if (c.search.runs < 1) throw ConfigError("search runs must be at least 1");
  if (!(c.search.prior.scale > 0.0)) throw ConfigError("prior_scale must be positive");
  if (!(c.rho_threshold >= 0.0)) throw ConfigError("rho_threshold must be non-negative");
  return c;
}

PipelineConfig read_pipeline_config(const fs::path& path) {
  auto in = detail::open_input(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pipeline_config(buf.str(), path.parent_path());
}

std::string pipeline_config_json(const PipelineConfig& c) {
  json data;
  switch (c.data.kind) {
    case DataSource::Kind::Preset: data["preset"] = c.data.value; break;
    case DataSource::Kind::GeneratorFile: data["generator"] = c.data.value; break;
    case DataSource::Kind::DatasetCsv: data["dataset"] = c.data.value; break;
    case DataSource::Kind::TableCsv: data["table"] = c.data.value; break;
  }
  if (c.data.n) data["n"] = *c.data.n;
  const auto& pr = c.cluster.priors;
  const auto& sc = c.search.search;
  json doc = {
      {"seed", c.seed},
      {"output_dir", c.output_dir.string()},
      {"data", data},
      {"cluster",
       {{"burnin", c.cluster.burnin},
        {"iterations", c.cluster.iterations},
        {"thin", c.cluster.thin},
        {"max_representative_draws", c.cluster.max_representative_draws},
        {"priors",
         {{"lambda", pr.lambda},
          {"rho_a", pr.rho_a},
          {"rho_b", pr.rho_b},
          {"atom_weight", pr.atom_weight},
          {"alpha_shape", pr.alpha_shape},
          {"alpha_rate", pr.alpha_rate},
          {"max_clusters", pr.max_clusters},
          {"initial_groups", pr.initial_groups}}}}},
      {"rho_threshold", c.rho_threshold},
      {"search",
       {{"strategy", strategy_name(sc.strategy)},
        {"kernel", kernel_name(sc.kernel)},
        {"iterations", sc.iterations},
        {"burnin", sc.burnin},
        {"runs", c.search.runs},
        {"threads", c.search.threads},
        {"within_fraction", sc.within_fraction},
        {"epsilon", sc.epsilon},
        {"prior_scale", c.search.prior.scale}}}};
  return doc.dump(2);
}

std::vector<std::size_t> retained_covariates(const std::vector<RhoSummary>& rho, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < rho.size(); ++p)
    if (rho[p].median >= threshold) out.push_back(p);
  return out;
}

std::string sha256_file(const fs::path& path) {
  auto in = detail::open_input(path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("cannot initialise SHA-256");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return hex.str();
}

// ---- reports ----------------------------------------------------------------

std::string format_rho_summary(const std::vector<RhoSummary>& rho, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "covariate" << std::right << std::setw(10) << "median" << std::setw(10)
      << "2.5%" << std::setw(10) << "97.5%" << '\n';
  out << std::fixed << std::setprecision(3);
  for (std::size_t p = 0; p < rho.size(); ++p)
    out << std::left << std::setw(12) << (p < names.size() ? names[p] : default_covariate_name(p, rho.size()))
        << std::right << std::setw(10) << rho[p].median << std::setw(10) << rho[p].lower << std::setw(10)
        << rho[p].upper << '\n';
  return out.str();
}

void write_experiment_json(const ExperimentResult& result, const std::vector<std::string>& names,
                           const SearchConfig& config, const fs::path& path) {
  json runs = json::array();
  for (const auto& r : result.runs) {
    json j = {{"seed", r.seed}, {"acceptance_percent", r.acceptance_rate}};
    j["iterations_to_best"] = r.iterations_to_best == kNeverVisited ? json(nullptr) : json(r.iterations_to_best);
    runs.push_back(j);
  }
  json models = json::array();
  for (const auto& m : result.models) {
    if (models.size() >= 10) break;
    models.push_back({{"model", describe_model(m.graph, names)}, {"probability", m.frequency}, {"log_marginal", m.log_marginal}});
  }
  auto q = [](const Quartiles& v) { return json{{"q1", v.q1}, {"median", v.median}, {"q3", v.q3}}; };
  json doc = {{"strategy", strategy_name(result.strategy)},
              {"kernel", kernel_name(config.kernel)},
              {"iterations", config.iterations},
              {"burnin", config.burnin},
              {"seed", config.seed},
              {"covariates", names},
              {"best", describe_model(result.best, names)},
              {"best_exhaustive", result.best_exhaustive},
              {"missed_best", result.missed_best},
              {"acceptance_percent", q(result.acceptance)},
              {"iterations_to_best", q(result.iterations_to_best)},
              {"runs", runs},
              {"models", models}};
  auto out = detail::open_output(path);
  out << doc.dump(2) << '\n';
  if (!out) throw ConfigError("failed writing " + path.string());
}

ExperimentSummary read_experiment_json(const fs::path& path) {
  auto in = detail::open_input(path);
  ExperimentSummary s;
  try {
    const json doc = json::parse(in);
    auto q = [](const json& j) { return Quartiles{j.at("q1").get<double>(), j.at("median").get<double>(), j.at("q3").get<double>()}; };
    s.strategy = doc.at("strategy").get<std::string>();
    s.runs = doc.at("runs").size();
    s.acceptance = q(doc.at("acceptance_percent"));
    s.iterations_to_best = q(doc.at("iterations_to_best"));
    s.missed_best = doc.at("missed_best").get<std::size_t>();
    s.best = doc.at("best").get<std::string>();
    for (const auto& m : doc.at("models"))
      s.top_models.emplace_back(m.at("model").get<std::string>(), m.at("probability").get<double>());
  } catch (const json::exception& e) {
    throw ConfigError("bad search summary " + path.string() + ": " + e.what());
  }
  return s;
}

namespace {

std::string mixing_block(const ExperimentSummary& s) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "strategy            " << s.strategy << " (" << s.runs << " runs)\n";
  out << "acceptance rate %   " << s.acceptance.median << " (" << s.acceptance.q1 << ", " << s.acceptance.q3 << ")\n";
  out << std::setprecision(0);
  out << "iterations to best  " << s.iterations_to_best.median << " (" << s.iterations_to_best.q1 << ", "
      << s.iterations_to_best.q3 << ")";
  if (s.missed_best) out << "  [" << s.missed_best << " runs never reached it]";
  out << "\nbest model          " << s.best << '\n';
  out << std::setprecision(3);
  for (std::size_t k = 0; k < std::min<std::size_t>(3, s.top_models.size()); ++k)
    out << "  " << k + 1 << ". " << s.top_models[k].first << "  " << s.top_models[k].second << '\n';
  return out.str();
}

std::string cluster_block(const ClusterTrace& trace, const RepresentativePartition* rep, const ProfileTable* table) {
  std::ostringstream out;
  out << "draws " << trace.size() << ", burn-in " << trace.burnin << ", thin " << trace.thin << ", seed "
      << trace.seed << "\n\n";
  out << format_rho_summary(posterior_rho_summary(trace), trace.names) << '\n';
  if (rep && table) {
    out << "representative partition: " << rep->clusters() << " clusters, sizes";
    for (auto s : rep->sizes) out << ' ' << s;
    out << "\n\n" << format_profile_table(*table);
    for (const auto& w : table->warnings) out << "warning: " << w << '\n';
  }
  return out.str();
}

}  // namespace

std::string build_report(const std::vector<ClusterTrace>& traces, const std::vector<ExperimentSummary>& searches) {
  if (traces.empty() && searches.empty()) throw ConfigError("report needs at least one trace or search summary");
  std::ostringstream out;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    out << "== clustering " << k + 1 << " ==\n";
    const auto& tr = traces[k];
    const bool profiles = tr.has_allocations() && !tr.draws.empty() && !tr.draws.front().clusters.empty() &&
                          !tr.draws.front().clusters.front().phi.empty();
    if (profiles) {
      const auto rep = representative_partition(tr);
      const auto table = profile_table(tr, rep);
      out << cluster_block(tr, &rep, &table);
    } else {
      out << cluster_block(tr, nullptr, nullptr);
    }
    out << '\n';
  }
  for (std::size_t k = 0; k < searches.size(); ++k) out << "== model search " << k + 1 << " ==\n" << mixing_block(searches[k]) << '\n';
  return out.str();
}

// ---- pipeline -----------------------------------------------------------------

PipelineResult run_pipeline(const PipelineConfig& config) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  std::vector<fs::path> outputs;
  PipelineResult result;
  const std::uint64_t sim_seed = config.seed + kSimulateSeedOffset;
  const std::uint64_t cluster_seed = config.seed + kClusterSeedOffset;
  const std::uint64_t search_seed = config.seed + kSearchSeedOffset;

  const CategoricalDataset data = stage("data", [&] {
    switch (config.data.kind) {
      case DataSource::Kind::Preset:
      case DataSource::Kind::GeneratorFile: {
        GeneratorSpec spec = config.data.kind == DataSource::Kind::Preset ? builtin_spec(config.data.value)
                                                                           : read_generator_spec(config.data.value);
        spec.seed = sim_seed;
        if (config.data.n) spec.n = *config.data.n;
        auto generated = generate(spec);
        write_generator_spec(spec, dir / "generator.json");
        write_dataset_csv(generated, dir / "data.csv");
        outputs.insert(outputs.end(), {dir / "generator.json", dir / "data.csv", metadata_path(dir / "data.csv")});
        return generated;
      }
      case DataSource::Kind::DatasetCsv:
        return read_dataset_csv(config.data.value).data;
      case DataSource::Kind::TableCsv:
        return expand_table(read_table_csv(config.data.value));
    }
    throw ConfigError("unknown data source");
  });
  const auto names = data.names();

  const ClusterTrace trace = stage("cluster", [&] {
    ChainSettings chain;
    chain.burnin = config.cluster.burnin;
    chain.iterations = config.cluster.iterations;
    chain.thin = config.cluster.thin;
    chain.seed = cluster_seed;
    auto t = run_chain(data, config.cluster.priors, chain);
    write_trace(t, dir / "trace.csv");
    outputs.push_back(dir / "trace.csv");
    return t;
  });

  const TGammaMatrix tgamma = stage("tgamma", [&] {
    auto m = accumulate(trace);
    write_tgamma_csv(m, dir / "tgamma.csv");
    outputs.push_back(dir / "tgamma.csv");
    return m;
  });

  const auto kept = stage("reduce", [&] {
    result.rho = posterior_rho_summary(trace);
    auto k = retained_covariates(result.rho, config.rho_threshold);
    if (k.empty()) throw ConfigError("no covariates remain after applying the rho threshold");
    if (k.size() < 2) throw ConfigError("fewer than two covariates remain after applying the rho threshold");
    return k;
  });
  for (std::size_t p = 0, j = 0; p < data.P(); ++p) {
    if (j < kept.size() && kept[j] == p) {
      result.kept.push_back(names[p]);
      ++j;
    } else {
      result.dropped.push_back(names[p]);
    }
  }
  result.log2_models_before = data.P() * (data.P() - 1) / 2;
  result.log2_models_after = kept.size() * (kept.size() - 1) / 2;

  SearchConfig search_config = config.search.search;
  search_config.seed = search_seed;
  result.search = stage("search", [&] {
    const auto sub = data.select(kept);
    MarginalCache cache(build_table(sub), config.search.prior, search_config.kernel == Kernel::ReversibleJump);
    const auto sub_tgamma = select(tgamma, kept);
    ExperimentOptions opts;
    opts.runs = config.search.runs;
    opts.threads = config.search.threads;
    auto r = run_experiment(cache, &sub_tgamma, search_config, opts);
    write_models_csv(r, result.kept, dir / "models.csv");
    write_runs_csv(r, dir / "runs.csv");
    write_experiment_json(r, result.kept, search_config, dir / "search.json");
    outputs.insert(outputs.end(), {dir / "models.csv", dir / "runs.csv", dir / "search.json"});
    return r;
  });

  stage("report", [&] {
    RepresentativeOptions ro;
    ro.max_draws = config.cluster.max_representative_draws;
    result.partition = representative_partition(trace, ro);
    result.profiles = profile_table(trace, result.partition);
    write_profile_csv(result.profiles, dir / "profiles.csv");

    std::ostringstream out;
    out << "== clustering ==\n" << cluster_block(trace, &result.partition, &result.profiles) << '\n';
    out << "== covariate reduction ==\n";
    out << "rho threshold " << config.rho_threshold << ": kept " << result.kept.size() << ", dropped "
        << result.dropped.size() << '\n';
    if (!result.dropped.empty()) {
      out << "dropped:";
      for (const auto& d : result.dropped) out << ' ' << d;
      out << '\n';
    }
    out << "model space " << log2_space(result.log2_models_before) << " -> " << log2_space(result.log2_models_after)
        << " graphs\n\n";
    out << "== model search ==\n" << format_experiment(result.search, result.kept) << '\n';
    result.report = out.str();
    auto f = detail::open_output(dir / "report.txt");
    f << result.report;
    outputs.insert(outputs.end(), {dir / "profiles.csv", dir / "report.txt"});
  });

  stage("manifest", [&] {
    json files = json::array();
    for (const auto& p : outputs)
      files.push_back({{"path", fs::relative(p, dir).generic_string()},
                       {"sha256", sha256_file(p)},
                       {"bytes", fs::file_size(p)}});
    json manifest = {{"config", json::parse(pipeline_config_json(config))},
                     {"seeds", {{"simulate", sim_seed}, {"cluster", cluster_seed}, {"search", search_seed}}},
                     {"kept", result.kept},
                     {"dropped", result.dropped},
                     {"model_space", {{"before", log2_space(result.log2_models_before)},
                                      {"after", log2_space(result.log2_models_after)}}},
                     {"files", files}};
    result.manifest = dir / "manifest.json";
    auto f = detail::open_output(result.manifest);
    f << manifest.dump(2) << '\n';
  });
  return result;
}

}  // namespace catgraph
