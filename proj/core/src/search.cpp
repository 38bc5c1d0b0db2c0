#include "catgraph/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "catgraph/dpcluster.hpp"
#include "catgraph/error.hpp"
#include "catgraph/oracle.hpp"
#include "csv.hpp"

namespace catgraph {

Strategy parse_strategy(std::string_view text) {
  if (text == "a" || text == "uniform") return Strategy::Uniform;
  if (text == "b" || text == "cluster_specific") return Strategy::ClusterSpecific;
  if (text == "c" || text == "combined_30_10") return Strategy::Combined30_10;
  if (text == "d" || text == "combined_20_20") return Strategy::Combined20_20;
  throw ConfigError("unknown strategy '" + std::string(text) + "' (expected a, b, c or d)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Uniform: return "uniform";
    case Strategy::ClusterSpecific: return "cluster_specific";
    case Strategy::Combined30_10: return "combined_30_10";
    case Strategy::Combined20_20: return "combined_20_20";
  }
  return "?";
}

Kernel parse_kernel(std::string_view text) {
  if (text == "marginal") return Kernel::Marginal;
  if (text == "rj") return Kernel::ReversibleJump;
  throw ConfigError("unknown kernel '" + std::string(text) + "' (expected marginal or rj)");
}

std::string kernel_name(Kernel k) { return k == Kernel::Marginal ? "marginal" : "rj"; }

std::string move_name(MoveType m) {
  switch (m) {
    case MoveType::Within: return "within";
    case MoveType::Add: return "add";
    case MoveType::Remove: return "remove";
    case MoveType::Swap: return "swap";
  }
  return "?";
}

void SearchConfig::validate(int nodes, const TGammaMatrix* tgamma) const {
  if (nodes < 2) throw ConfigError("search needs at least two covariates");
  if (!(within_fraction >= 0.0 && within_fraction < 1.0))
    throw ConfigError("within-model fraction must lie in [0,1)");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (iterations < 1) throw ConfigError("search needs at least one iteration");
  if (strategy != Strategy::Uniform) {
    if (!tgamma) throw ConfigError("strategy " + strategy_name(strategy) + " needs a T_gamma matrix");
    if (tgamma->P != static_cast<std::size_t>(nodes))
      throw ConfigError("T_gamma matrix does not match the number of covariates");
    if (epsilon == 0.0) throw ConfigError("T_gamma-weighted strategies need epsilon > 0");
  }
  if (start && start->nodes() != nodes) throw ConfigError("start graph has the wrong number of nodes");
}

// ---- proposals --------------------------------------------------------------

EdgeWeights::EdgeWeights(int nodes, double epsilon) : nodes_(nodes), epsilon_(epsilon) {}

EdgeWeights::EdgeWeights(const TGammaMatrix& tgamma, double epsilon)
    : nodes_(static_cast<int>(tgamma.P)), epsilon_(epsilon), tgamma_(&tgamma) {}

double EdgeWeights::add_weight(Edge e) const {
  if (!tgamma_) return 1.0;
  return (*tgamma_)(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v)) + epsilon_;
}

double EdgeWeights::remove_weight(Edge e) const {
  if (!tgamma_) return 1.0;
  return (1.0 - (*tgamma_)(static_cast<std::size_t>(e.u), static_cast<std::size_t>(e.v))) + epsilon_;
}

namespace {

EdgeProposal draw_edge(const std::vector<Edge>& candidates, const std::vector<double>& weights, Rng& rng) {
  const std::size_t k = sample_index(weights, rng.uniform());
  double total = 0.0;
  for (double w : weights) total += w;
  return {candidates[k], weights[k] / total};
}

double edge_probability(const std::vector<Edge>& candidates, const std::vector<double>& weights, Edge e) {
  double total = 0.0, mine = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    total += weights[k];
    if (candidates[k] == e) mine = weights[k];
  }
  return total > 0.0 ? mine / total : 0.0;
}

std::vector<double> add_weights(const std::vector<Edge>& candidates, const EdgeWeights& w) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (auto e : candidates) out.push_back(w.add_weight(e));
  return out;
}

std::vector<double> remove_weights(const std::vector<Edge>& candidates, const EdgeWeights& w) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (auto e : candidates) out.push_back(w.remove_weight(e));
  return out;
}

}  // namespace

EdgeProposal propose_edge_add(const Graph& g, const EdgeWeights& w, Rng& rng) {
  const auto candidates = g.absent_edges();
  if (candidates.empty()) throw ConfigError("cannot add an edge to a complete graph");
  return draw_edge(candidates, add_weights(candidates, w), rng);
}

EdgeProposal propose_edge_remove(const Graph& g, const EdgeWeights& w, Rng& rng) {
  const auto candidates = g.edges();
  if (candidates.empty()) throw ConfigError("cannot remove an edge from an empty graph");
  return draw_edge(candidates, remove_weights(candidates, w), rng);
}

SwapProposal propose_swap(const Graph& g, const EdgeWeights& w, Rng& rng) {
  const auto out = propose_edge_remove(g, w, rng);
  const auto in = propose_edge_add(g, w, rng);
  return {out.edge, in.edge, out.probability * in.probability};
}

double add_probability(const Graph& g, const EdgeWeights& w, Edge e) {
  const auto candidates = g.absent_edges();
  return edge_probability(candidates, add_weights(candidates, w), e);
}

double remove_probability(const Graph& g, const EdgeWeights& w, Edge e) {
  const auto candidates = g.edges();
  return edge_probability(candidates, remove_weights(candidates, w), e);
}

double tgamma_share(Strategy s) {
  switch (s) {
    case Strategy::Uniform: return 0.0;
    case Strategy::ClusterSpecific: return 1.0;
    case Strategy::Combined30_10: return 0.25;
    case Strategy::Combined20_20: return 0.5;
  }
  return 0.0;
}

WeightScheme strategy_mix(Strategy s, Rng& rng) {
  if (s == Strategy::Uniform) return WeightScheme::Uniform;
  if (s == Strategy::ClusterSpecific) return WeightScheme::TGamma;
  return rng.uniform() < tgamma_share(s) ? WeightScheme::TGamma : WeightScheme::Uniform;
}

// ---- trace ------------------------------------------------------------------

double SearchTrace::acceptance_rate() const {
  return between_attempts ? static_cast<double>(between_accepted) / static_cast<double>(between_attempts) : 0.0;
}

std::optional<std::uint32_t> SearchTrace::id_of(const Graph& g) const {
  for (std::size_t k = 0; k < graphs.size(); ++k)
    if (graphs[k] == g) return static_cast<std::uint32_t>(k);
  return std::nullopt;
}

std::size_t SearchTrace::first_visit_of(const Graph& g) const {
  const auto id = id_of(g);
  return id ? first_visit[*id] : kNeverVisited;
}

std::vector<std::pair<Graph, double>> SearchTrace::frequencies() const {
  std::vector<std::pair<Graph, double>> out;
  for (std::size_t k = 0; k < graphs.size(); ++k)
    if (visits[k] > 0) out.emplace_back(graphs[k], static_cast<double>(visits[k]) / static_cast<double>(iterations));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

// ---- Laplace proposals --------------------------------------------------------

double laplace_log_density(const FitResult& fit, const Eigen::VectorXd& x) {
  const Eigen::Index k = fit.mode.size();
  const Eigen::VectorXd r = fit.cholesky.transpose() * (x - fit.mode);
  return -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + 0.5 * fit.log_det_neg_hessian -
         0.5 * r.squaredNorm();
}

Eigen::VectorXd laplace_draw(const FitResult& fit, Rng& rng) {
  Eigen::VectorXd z(fit.mode.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
  // x = mode + L^-T z has covariance (L L')^-1.
  return fit.mode + fit.cholesky.transpose().triangularView<Eigen::Upper>().solve(z);
}

// ---- sampler ------------------------------------------------------------------

GraphSearch::GraphSearch(MarginalCache& cache, const TGammaMatrix* tgamma, SearchConfig config)
    : cache_(cache),
      tgamma_(tgamma),
      config_(std::move(config)),
      flat_(static_cast<int>(cache.table().levels.size()), config_.epsilon) {
  const int P = static_cast<int>(cache_.table().levels.size());
  config_.validate(P, tgamma_);
  if (tgamma_) informed_.emplace(*tgamma_, config_.epsilon);
  current_ = config_.start.value_or(Graph(P));
  trace_.iterations = config_.iterations;
  trace_.burnin = config_.burnin;
  trace_.seed = config_.seed;
  current_id_ = intern(current_);
  trace_.first_visit[current_id_] = 0;
  if (config_.kernel == Kernel::Marginal) {
    current_log_marginal_ = cache_.log_marginal(current_);
  } else {
    current_model_ = cache_.model(current_);
    if (current_model_.fit->cholesky.size() == 0)
      throw ConfigError("the rj kernel needs a marginal cache that keeps full models");
    beta_ = current_model_.fit->mode;
  }
}

std::uint32_t GraphSearch::intern(const Graph& g) {
  auto [it, inserted] = index_.try_emplace(g, static_cast<std::uint32_t>(trace_.graphs.size()));
  if (inserted) {
    trace_.graphs.push_back(g);
    trace_.visits.push_back(0);
    trace_.first_visit.push_back(kNeverVisited);
  }
  return it->second;
}

bool GraphSearch::propose(MoveType move, const EdgeWeights& w, Rng& rng, Graph& out, double& log_fwd,
                          double& log_rev) const {
  out = current_;
  switch (move) {
    case MoveType::Add: {
      if (current_.complete()) return false;
      const auto e = propose_edge_add(current_, w, rng);
      out.add_edge(e.edge);
      log_fwd = std::log(e.probability);
      log_rev = std::log(remove_probability(out, w, e.edge));
      return true;
    }
    case MoveType::Remove: {
      if (current_.edge_count() == 0) return false;
      const auto e = propose_edge_remove(current_, w, rng);
      out.remove_edge(e.edge);
      log_fwd = std::log(e.probability);
      log_rev = std::log(add_probability(out, w, e.edge));
      return true;
    }
    case MoveType::Swap: {
      if (current_.edge_count() == 0 || current_.complete()) return false;
      const auto s = propose_swap(current_, w, rng);
      out.remove_edge(s.out);
      out.add_edge(s.in);
      log_fwd = std::log(s.probability);
      log_rev = std::log(remove_probability(out, w, s.in) * add_probability(out, w, s.out));
      return true;
    }
    case MoveType::Within: break;
  }
  return false;
}

void GraphSearch::refresh_parameters(Rng& rng) {
  const FitResult& fit = *current_model_.fit;
  const Eigen::VectorXd candidate = laplace_draw(fit, rng);
  const auto& post = *current_model_.posterior;
  const double log_a = post.log_density(candidate) - post.log_density(beta_) +
                       laplace_log_density(fit, beta_) - laplace_log_density(fit, candidate);
  if (std::log(rng.uniform_open()) < log_a) beta_ = candidate;
}

void GraphSearch::step(Rng& rng, SearchStep& record) {
  record = SearchStep{};
  record.from = record.proposed = current_id_;
  if (rng.uniform() < config_.within_fraction) {
    record.move = MoveType::Within;
    ++trace_.within_moves;
    if (config_.kernel == Kernel::ReversibleJump) refresh_parameters(rng);
    record.accepted = true;
    return;
  }
  record.move = static_cast<MoveType>(1 + std::min<int>(2, static_cast<int>(rng.uniform() * 3.0)));
  record.scheme = strategy_mix(config_.strategy, rng);
  ++trace_.between_attempts;
  if (record.scheme == WeightScheme::TGamma) ++trace_.tgamma_proposals;
  const EdgeWeights& w = record.scheme == WeightScheme::TGamma ? *informed_ : flat_;

  Graph next;
  record.feasible = propose(record.move, w, rng, next, record.log_forward, record.log_reverse);
  if (!record.feasible) return;
  record.proposed = intern(next);

  double log_a = record.log_reverse - record.log_forward;
  MarginalCache::Model next_model;
  Eigen::VectorXd next_beta;
  double next_log_marginal = 0.0;
  try {
    if (config_.kernel == Kernel::Marginal) {
      next_log_marginal = cache_.log_marginal(next);
      log_a += next_log_marginal - current_log_marginal_;
    } else {
      next_model = cache_.model(next);
      next_beta = laplace_draw(*next_model.fit, rng);
      log_a += next_model.posterior->log_density(next_beta) - current_model_.posterior->log_density(beta_) +
               laplace_log_density(*current_model_.fit, beta_) - laplace_log_density(*next_model.fit, next_beta);
    }
  } catch (const NumericalError&) {
    ++trace_.fit_failures;
    return;
  }
  if (std::log(rng.uniform_open()) < log_a) {
    record.accepted = true;
    ++trace_.between_accepted;
    current_ = std::move(next);
    current_id_ = record.proposed;
    if (config_.kernel == Kernel::Marginal) {
      current_log_marginal_ = next_log_marginal;
    } else {
      current_model_ = std::move(next_model);
      beta_ = std::move(next_beta);
    }
  }
}

SearchTrace GraphSearch::run() {
  Rng rng(config_.seed);
  const std::size_t total = config_.burnin + config_.iterations;
  if (config_.record_steps) trace_.steps.reserve(config_.iterations);
  SearchStep record;
  for (std::size_t t = 1; t <= total; ++t) {
    if (t == config_.burnin + 1) {
      // Post burn-in counters only.
      trace_.within_moves = trace_.between_attempts = trace_.between_accepted = 0;
      trace_.tgamma_proposals = trace_.fit_failures = 0;
    }
    step(rng, record);
    auto& first = trace_.first_visit[current_id_];
    first = std::min(first, t);
    if (t > config_.burnin) {
      ++trace_.visits[current_id_];
      if (config_.record_steps) trace_.steps.push_back(record);
    }
  }
  return trace_;
}

SearchTrace run_search(MarginalCache& cache, const TGammaMatrix* tgamma, const SearchConfig& config) {
  GraphSearch search(cache, tgamma, config);
  return search.run();
}

// ---- repeated runs ------------------------------------------------------------

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) return {};
  return {empirical_quantile(values, 0.25), empirical_quantile(values, 0.5), empirical_quantile(values, 0.75)};
}

ExperimentResult run_experiment(MarginalCache& cache, const TGammaMatrix* tgamma, const SearchConfig& config,
                                const ExperimentOptions& options) {
  if (options.runs < 1) throw ConfigError("experiment needs at least one run");
  std::vector<SearchTrace> traces(options.runs);
  std::vector<std::exception_ptr> errors(options.runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < options.runs; r = next++) {
      try {
        SearchConfig c = config;
        c.seed = config.seed + r;
        c.record_steps = false;
        traces[r] = run_search(cache, tgamma, c);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(options.runs)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult out;
  out.strategy = config.strategy;
  const int P = static_cast<int>(cache.table().levels.size());
  if (options.best) {
    out.best = *options.best;
  } else if (P <= kMaxEnumerationNodes) {
    const auto post = exhaustive_model_posterior(cache);
    out.best = post.graphs[post.best()];
    out.best_exhaustive = true;
  } else {
    double top = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& tr : traces)
      for (std::size_t k = 0; k < tr.graphs.size(); ++k) {
        if (tr.first_visit[k] == kNeverVisited) continue;
        double lm = 0.0;
        try {
          lm = cache.log_marginal(tr.graphs[k]);
        } catch (const NumericalError&) {
          continue;
        }
        if (!found || lm > top) {
          top = lm;
          out.best = tr.graphs[k];
          found = true;
        }
      }
    if (!found) throw NumericalError("no visited graph could be fitted");
  }

  std::vector<double> acc, hits;
  std::unordered_map<Graph, std::uint64_t, GraphHash> pooled;
  const std::size_t horizon = config.burnin + config.iterations;
  for (std::size_t r = 0; r < options.runs; ++r) {
    const auto& tr = traces[r];
    RunSummary s;
    s.seed = tr.seed;
    s.acceptance_rate = 100.0 * tr.acceptance_rate();
    s.iterations_to_best = tr.first_visit_of(out.best);
    acc.push_back(s.acceptance_rate);
    if (s.iterations_to_best == kNeverVisited) {
      ++out.missed_best;
      hits.push_back(static_cast<double>(horizon + 1));
    } else {
      hits.push_back(static_cast<double>(s.iterations_to_best));
    }
    for (std::size_t k = 0; k < tr.graphs.size(); ++k)
      if (tr.visits[k]) pooled[tr.graphs[k]] += tr.visits[k];
    out.runs.push_back(s);
  }
  out.acceptance = quartiles(acc);
  out.iterations_to_best = quartiles(hits);
  const double denom = static_cast<double>(options.runs * config.iterations);
  for (auto& [g, v] : pooled) {
    ModelFrequency m;
    m.graph = g;
    m.frequency = static_cast<double>(v) / denom;
    try {
      m.log_marginal = cache.log_marginal(g);
    } catch (const NumericalError&) {
      m.log_marginal = std::numeric_limits<double>::quiet_NaN();
    }
    out.models.push_back(std::move(m));
  }
  std::sort(out.models.begin(), out.models.end(), [](const ModelFrequency& a, const ModelFrequency& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.graph.key() < b.graph.key();
  });
  return out;
}

std::string describe_model(const Graph& g, const std::vector<std::string>& names) {
  if (names.empty() || names.size() != static_cast<std::size_t>(g.nodes())) return format_model(g);
  const bool letters = std::all_of(names.begin(), names.end(), [](const std::string& s) { return s.size() == 1; });
  auto cliques = maximal_cliques(g);
  std::stable_sort(cliques.begin(), cliques.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  std::string out;
  for (std::size_t k = 0; k < cliques.size(); ++k) {
    if (k) out += '+';
    for (std::size_t j = 0; j < cliques[k].size(); ++j) {
      if (j && !letters) out += ':';
      out += names[static_cast<std::size_t>(cliques[k][j])];
    }
  }
  return out;
}

std::string format_experiment(const ExperimentResult& result, const std::vector<std::string>& names,
                              std::size_t top) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "strategy            " << strategy_name(result.strategy) << " (" << result.runs.size() << " runs)\n";
  out << "acceptance rate %   " << result.acceptance.median << " (" << result.acceptance.q1 << ", "
      << result.acceptance.q3 << ")\n";
  out << std::setprecision(0);
  out << "iterations to best  " << result.iterations_to_best.median << " (" << result.iterations_to_best.q1
      << ", " << result.iterations_to_best.q3 << ")";
  if (result.missed_best) out << "  [" << result.missed_best << " runs never reached it]";
  out << '\n';
  out << "best model          " << describe_model(result.best, names)
      << (result.best_exhaustive ? " (exhaustive)" : " (best visited)") << '\n';
  out << std::setprecision(3);
  for (std::size_t k = 0; k < std::min(top, result.models.size()); ++k)
    out << "  " << k + 1 << ". " << describe_model(result.models[k].graph, names) << "  "
        << result.models[k].frequency << '\n';
  return out.str();
}

void write_models_csv(const ExperimentResult& result, const std::vector<std::string>& names,
                      const std::filesystem::path& path, std::size_t top) {
  auto out = detail::open_output(path);
  out.precision(10);
  out << "rank,model,probability,log_marginal\n";
  for (std::size_t k = 0; k < std::min(top, result.models.size()); ++k)
    out << k + 1 << ',' << detail::csv_escape(describe_model(result.models[k].graph, names)) << ','
        << result.models[k].frequency << ',' << result.models[k].log_marginal << '\n';
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_runs_csv(const ExperimentResult& result, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out.precision(10);
  out << "run,seed,acceptance_percent,iterations_to_best\n";
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& s = result.runs[r];
    out << r + 1 << ',' << s.seed << ',' << s.acceptance_rate << ',';
    if (s.iterations_to_best != kNeverVisited) out << s.iterations_to_best;
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace catgraph
