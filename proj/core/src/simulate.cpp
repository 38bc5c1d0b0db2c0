#include "catgraph/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "catgraph/error.hpp"
#include "catgraph/loglinear.hpp"
#include "catgraph/rng.hpp"
#include "csv.hpp"

namespace catgraph {

using nlohmann::json;

void GeneratorSpec::validate() const {
  if (components.empty()) throw ConfigError("generator spec has no components");
  if (n < 1) throw ConfigError("generator spec needs n >= 1");
  if (levels.size() < 2) throw ConfigError("generator spec needs at least two covariates");
  if (!names.empty() && names.size() != levels.size())
    throw ConfigError("generator spec names must have one entry per covariate");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
      throw ConfigError("mixture weights must be non-negative");
    total += c.weight;
    if (c.graph.nodes() != static_cast<int>(levels.size()))
      throw ConfigError("component graph does not cover every covariate");
    const LogLinearModel model(c.graph, levels);
    if (static_cast<std::size_t>(c.beta.size()) != model.column_count())
      throw ConfigError("coefficient vector length " + std::to_string(c.beta.size()) +
                        " does not match the " + std::to_string(model.column_count()) +
                        " design columns of component '" + format_model(c.graph) + "'");
    if (!c.beta.allFinite()) throw ConfigError("coefficients must be finite");
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
}

std::vector<double> cell_probabilities(const Graph& graph, const Eigen::VectorXd& beta,
                                       std::span<const int> levels) {
  const LogLinearModel model(graph, std::vector<int>(levels.begin(), levels.end()));
  if (static_cast<std::size_t>(beta.size()) != model.column_count())
    throw ConfigError("coefficient vector length does not match the design");
  if (!beta.allFinite()) throw ConfigError("coefficients must be finite");
  const Eigen::VectorXd eta = design_matrix(model) * beta;
  if (eta.maxCoeff() > kMaxLinearPredictor)
    throw NumericalError("linear predictor exceeds " + std::to_string(kMaxLinearPredictor));
  const double top = eta.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(eta.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(eta[static_cast<Eigen::Index>(i)] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

namespace {

struct PreparedComponent {
  std::vector<double> cumulative;               // over the connected covariates
  std::vector<std::vector<double>> isolated;    // per isolated covariate, level probabilities
};

// Inverse-CDF lookup on a cumulative vector whose last entry is ~1.
std::size_t lookup(const std::vector<double>& cumulative, double u) {
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace

CategoricalDataset generate(const GeneratorSpec& spec) {
  spec.validate();
  const int P = static_cast<int>(spec.levels.size());

  std::vector<int> active, isolated;
  for (int p = 0; p < P; ++p) {
    const bool connected = std::any_of(spec.components.begin(), spec.components.end(),
                                       [&](const auto& c) { return c.weight > 0.0 && c.graph.degree(p) > 0; });
    (connected ? active : isolated).push_back(p);
  }
  std::vector<int> active_levels;
  for (int p : active) active_levels.push_back(spec.levels[static_cast<std::size_t>(p)]);

  std::vector<PreparedComponent> prepared;
  std::vector<double> weights;
  for (const auto& comp : spec.components) {
    weights.push_back(comp.weight);
    const LogLinearModel full(comp.graph, spec.levels);
    PreparedComponent pc;
    if (!active.empty()) {
      const Graph sub_graph = comp.graph.induced(active);
      const LogLinearModel sub(sub_graph, active_levels);
      Eigen::VectorXd sub_beta(static_cast<Eigen::Index>(sub.column_count()));
      for (std::size_t t = 0; t < sub.terms().size(); ++t) {
        Term mapped;
        for (int q : sub.terms()[t]) mapped.push_back(active[static_cast<std::size_t>(q)]);
        const std::size_t ft = full.find_term(mapped);
        if (ft == LogLinearModel::npos) throw ConfigError("term mismatch while restricting a component");
        for (std::size_t j = 0; j < sub.term_columns(t); ++j)
          sub_beta[static_cast<Eigen::Index>(sub.term_offset(t) + j)] =
              comp.beta[static_cast<Eigen::Index>(full.term_offset(ft) + j)];
      }
      auto probs = cell_probabilities(sub_graph, sub_beta, active_levels);
      pc.cumulative.resize(probs.size());
      std::partial_sum(probs.begin(), probs.end(), pc.cumulative.begin());
    }
    for (int p : isolated) {
      const std::size_t t = full.find_term(Term{p});
      const int m = spec.levels[static_cast<std::size_t>(p)];
      std::vector<double> cum(static_cast<std::size_t>(m));
      double acc = 0.0;
      for (int l = 0; l < m; ++l) {
        const double eta =
            l == 0 ? 0.0 : comp.beta[static_cast<Eigen::Index>(full.term_offset(t) + static_cast<std::size_t>(l - 1))];
        if (eta > kMaxLinearPredictor) throw NumericalError("main effect exceeds the linear predictor bound");
        acc += std::exp(eta);
        cum[static_cast<std::size_t>(l)] = acc;
      }
      pc.isolated.push_back(std::move(cum));
    }
    prepared.push_back(std::move(pc));
  }

  std::vector<int> codes(spec.n * static_cast<std::size_t>(P));
  ContingencyTable lattice;
  lattice.levels = active_levels;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t k = sample_index(weights, counter_uniform(spec.seed, i, 0));
    const auto& pc = prepared[k];
    int* row = codes.data() + i * static_cast<std::size_t>(P);
    if (!active.empty()) {
      const auto cell = lattice.cell(lookup(pc.cumulative, counter_uniform(spec.seed, i, 1)));
      for (std::size_t a = 0; a < active.size(); ++a) row[active[a]] = cell[a];
    }
    for (std::size_t j = 0; j < isolated.size(); ++j)
      row[isolated[j]] =
          static_cast<int>(lookup(pc.isolated[j], counter_uniform(spec.seed, i, 2 + j)));
  }
  return CategoricalDataset(spec.n, spec.levels, std::move(codes), spec.names);
}

Eigen::VectorXd preset_coefficients(const Graph& graph, std::span<const int> levels, double main,
                                    double interaction, bool alternate) {
  const LogLinearModel model(graph, std::vector<int>(levels.begin(), levels.end()));
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.column_count()));
  for (std::size_t t = 1; t < model.terms().size(); ++t) {
    const auto& term = model.terms()[t];
    // Enumerate the level tuples of this term in column order.
    std::vector<int> tuple(term.size(), 1);
    for (std::size_t j = 0; j < model.term_columns(t); ++j) {
      const auto col = static_cast<Eigen::Index>(model.term_offset(t) + j);
      if (term.size() == 1) {
        const int sign = ((term[0] + tuple[0] - 1) % 2 == 0) ? 1 : -1;
        beta[col] = sign * main;
      } else {
        const int sum = std::accumulate(tuple.begin(), tuple.end(), 0);
        beta[col] = (!alternate || sum % 2 == 0 ? 1.0 : -1.0) * interaction;
      }
      for (std::size_t q = term.size(); q-- > 0;) {
        if (++tuple[q] < levels[static_cast<std::size_t>(term[q])]) break;
        tuple[q] = 1;
      }
    }
  }
  return beta;
}

namespace {

struct PresetShape {
  const char* name;
  std::size_t P;
  int levels;
  std::size_t n;
  std::vector<double> weights;
  // Model 1, then two perturbations of it (one edge added, one removed).
  const char* model1;
  const char* add2;
  const char* drop2;
  const char* add3;
  const char* drop3;
  double interaction = 0.7;
  bool alternate = true;
};

Edge edge_from(const char* two, int P) {
  Graph g = parse_model(two, P);
  return g.edges().at(0);
}

GeneratorSpec make_preset(const PresetShape& s, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.name = s.name;
  spec.n = s.n;
  spec.levels.assign(s.P, s.levels);
  spec.seed = seed;
  const int P = static_cast<int>(s.P);
  Graph m1 = parse_model(s.model1, P);
  Graph m2 = m1;
  m2.add_edge(edge_from(s.add2, P));
  m2.remove_edge(edge_from(s.drop2, P));
  Graph m3 = m1;
  m3.add_edge(edge_from(s.add3, P));
  m3.remove_edge(edge_from(s.drop3, P));
  const Graph graphs[] = {m1, m2, m3};
  for (std::size_t k = 0; k < 3; ++k)
    spec.components.push_back(
        {graphs[k], preset_coefficients(graphs[k], spec.levels, 0.3, s.interaction, s.alternate),
         s.weights[k]});
  return spec;
}

}  // namespace

std::vector<std::string> builtin_spec_names() {
  return {"sim1", "sim2", "sim3", "sim4", "sim5", "sim1-scaled", "quad4", "tri3"};
}

GeneratorSpec builtin_spec(const std::string& name) {
  const std::vector<double> main_weights{0.8, 0.1, 0.1};
  if (name == "sim1")
    return make_preset({"sim1", 10, 2, 10000, main_weights, "AB+AD+BC+CD+HI+HJ+IJ+E+F+G", "BD",
                        "AB", "AC", "HJ"},
                       101);
  if (name == "sim2")
    return make_preset({"sim2", 10, 2, 10000, main_weights, "AB+AD+BC+CD+AFG+E+H+I+J", "BD", "AB",
                        "DF", "AG"},
                       102);
  if (name == "sim3")
    return make_preset({"sim3", 10, 2, 10000, main_weights, "AB+AD+BC+CD+AFG+HIJ+E", "BD", "HJ",
                        "GJ", "AD"},
                       103);
  if (name == "sim4") {
    // 20 ternary covariates; the first six interact.
    return make_preset({"sim4", 20, 3, 5000, {0.42, 0.29, 0.29}, "ABC+BE+DE+EF", "AD", "BE", "CF",
                        "DE"},
                       104);
  }
  if (name == "sim5") {
    // 100 binary covariates (named numerically); the first eight interact.
    return make_preset({"sim5", 100, 2, 10000, main_weights, "1.2+1.3+1.4+5.6.7.8", "2.3", "1.4",
                        "4.5", "6.8"},
                       105);
  }
  if (name == "sim1-scaled")
    return make_preset({"sim1-scaled", 6, 2, 5000, main_weights, "ABC+DE+F", "CD", "AB", "BE",
                        "DE", 1.2, false},
                       106);
  if (name == "quad4")
    return make_preset({"quad4", 4, 2, 5000, main_weights, "AB+BC+D", "CD", "AB", "AC", "BC"}, 107);
  if (name == "tri3") {
    GeneratorSpec spec;
    spec.name = "tri3";
    spec.n = 100000;
    spec.levels = {2, 3, 2};
    spec.seed = 108;
    const Graph graphs[] = {parse_model("AB+BC", 3), parse_model("AC+B", 3), Graph(3)};
    const double w[] = {0.6, 0.3, 0.1};
    for (std::size_t k = 0; k < 3; ++k)
      spec.components.push_back({graphs[k], preset_coefficients(graphs[k], spec.levels), w[k]});
    return spec;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

GeneratorSpec read_generator_spec(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  GeneratorSpec spec;
  try {
    const json j = json::parse(in);
    spec.name = j.value("name", path.stem().string());
    spec.n = j.at("n").get<std::size_t>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.levels = j.at("levels").get<std::vector<int>>();
    if (j.contains("names")) spec.names = j.at("names").get<std::vector<std::string>>();
    const int P = static_cast<int>(spec.levels.size());
    for (const auto& c : j.at("components")) {
      GeneratorComponent comp;
      comp.graph = parse_model(c.at("graph").get<std::string>(), P);
      comp.weight = c.at("weight").get<double>();
      if (c.contains("beta")) {
        const auto b = c.at("beta").get<std::vector<double>>();
        comp.beta = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      } else {
        comp.beta = preset_coefficients(comp.graph, spec.levels, c.value("main", 0.3),
                                        c.value("interaction", 0.7), c.value("alternate", true));
      }
      spec.components.push_back(std::move(comp));
    }
  } catch (const json::exception& e) {
    throw ConfigError("invalid generator spec '" + path.string() + "': " + e.what());
  }
  spec.validate();
  return spec;
}

void write_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path) {
  json j;
  j["name"] = spec.name;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["levels"] = spec.levels;
  if (!spec.names.empty()) j["names"] = spec.names;
  j["components"] = json::array();
  for (const auto& c : spec.components)
    j["components"].push_back({{"graph", format_model(c.graph)},
                               {"weight", c.weight},
                               {"beta", std::vector<double>(c.beta.begin(), c.beta.end())}});
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace catgraph
