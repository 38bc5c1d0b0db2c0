#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "catgraph/graph.hpp"
#include "catgraph/loglinear.hpp"
#include "catgraph/rng.hpp"
#include "catgraph/tgamma.hpp"

namespace catgraph {

// (a) uniform edges; (b) T_gamma-weighted edges; (c) (a) in 30% of iterations
// and (b) in 10%; (d) 20% each.
enum class Strategy { Uniform, ClusterSpecific, Combined30_10, Combined20_20 };
enum class Kernel { Marginal, ReversibleJump };
enum class MoveType { Within, Add, Remove, Swap };
enum class WeightScheme { Uniform, TGamma };

Strategy parse_strategy(std::string_view text);  // a|b|c|d or the long names
std::string strategy_name(Strategy s);
Kernel parse_kernel(std::string_view text);
std::string kernel_name(Kernel k);
std::string move_name(MoveType m);

struct SearchConfig {
  Strategy strategy = Strategy::Uniform;
  Kernel kernel = Kernel::Marginal;
  double within_fraction = 0.6;
  double epsilon = 1e-6;
  std::size_t iterations = 10000;  // after burn-in
  std::size_t burnin = 0;
  std::uint64_t seed = 1;
  std::optional<Graph> start;  // empty graph when unset
  bool record_steps = false;

  void validate(int nodes, const TGammaMatrix* tgamma) const;
};

// Edge weights used by one between-model proposal.
class EdgeWeights {
 public:
  // Flat weights: every candidate equally likely.
  EdgeWeights(int nodes, double epsilon);
  EdgeWeights(const TGammaMatrix& tgamma, double epsilon);

  double add_weight(Edge e) const;     // t + eps
  double remove_weight(Edge e) const;  // (1 - t) + eps

 private:
  int nodes_;
  double epsilon_;
  const TGammaMatrix* tgamma_ = nullptr;
};

struct EdgeProposal {
  Edge edge;
  double probability = 0.0;
};

struct SwapProposal {
  Edge out;
  Edge in;
  double probability = 0.0;
};

// Sampled absent edge and its exact selection probability. Graph must not be complete.
EdgeProposal propose_edge_add(const Graph& g, const EdgeWeights& w, Rng& rng);
// Sampled present edge. Graph must have an edge.
EdgeProposal propose_edge_remove(const Graph& g, const EdgeWeights& w, Rng& rng);
// Independent removal and addition draws from g; probability is their product.
SwapProposal propose_swap(const Graph& g, const EdgeWeights& w, Rng& rng);

double add_probability(const Graph& g, const EdgeWeights& w, Edge e);
double remove_probability(const Graph& g, const EdgeWeights& w, Edge e);

// Weighting scheme for one between-model proposal. Pure strategies consume no randomness.
WeightScheme strategy_mix(Strategy s, Rng& rng);
// Long-run share of between-model proposals using T_gamma weights.
double tgamma_share(Strategy s);

struct SearchStep {
  MoveType move = MoveType::Within;
  WeightScheme scheme = WeightScheme::Uniform;
  bool feasible = true;
  bool accepted = false;
  std::uint32_t from = 0;      // graph id before the step
  std::uint32_t proposed = 0;  // graph id proposed (== from for within moves)
  double log_forward = 0.0;    // log q(from -> proposed)
  double log_reverse = 0.0;    // log q(proposed -> from)
};

inline constexpr std::size_t kNeverVisited = std::numeric_limits<std::size_t>::max();

struct SearchTrace {
  std::vector<Graph> graphs;                // id -> graph, every graph visited or proposed
  std::vector<std::uint64_t> visits;        // post burn-in visits per id
  std::vector<std::size_t> first_visit;     // iteration (0 = start) per id, kNeverVisited if never
  std::vector<SearchStep> steps;            // post burn-in, when recorded
  std::size_t iterations = 0;
  std::size_t burnin = 0;
  std::uint64_t seed = 0;
  std::uint64_t within_moves = 0;
  std::uint64_t between_attempts = 0;
  std::uint64_t between_accepted = 0;
  std::uint64_t tgamma_proposals = 0;       // between-model attempts using T_gamma weights
  std::uint64_t fit_failures = 0;

  double acceptance_rate() const;  // accepted / attempted between-model moves
  std::optional<std::uint32_t> id_of(const Graph& g) const;
  std::size_t first_visit_of(const Graph& g) const;
  // Visit frequencies, most visited first.
  std::vector<std::pair<Graph, double>> frequencies() const;
};

// Model-space sampler for one table. Shares its marginal cache, which may be
// reused across runs.
class GraphSearch {
 public:
  GraphSearch(MarginalCache& cache, const TGammaMatrix* tgamma, SearchConfig config);

  SearchTrace run();

  // One transition; public for step-level tests.
  void step(Rng& rng, SearchStep& record);
  const Graph& current() const { return current_; }

 private:
  std::uint32_t intern(const Graph& g);
  bool propose(MoveType move, const EdgeWeights& w, Rng& rng, Graph& out, double& log_fwd,
               double& log_rev) const;
  void refresh_parameters(Rng& rng);
  double log_target(const Graph& g, const Eigen::VectorXd* beta, MarginalCache::Model* model);

  MarginalCache& cache_;
  const TGammaMatrix* tgamma_;
  std::unordered_map<Graph, std::uint32_t, GraphHash> index_;
  SearchConfig config_;
  EdgeWeights flat_;
  std::optional<EdgeWeights> informed_;
  SearchTrace trace_;
  Graph current_;
  std::uint32_t current_id_ = 0;
  double current_log_marginal_ = 0.0;
  // Reversible-jump kernel state.
  MarginalCache::Model current_model_;
  Eigen::VectorXd beta_;
};

SearchTrace run_search(MarginalCache& cache, const TGammaMatrix* tgamma, const SearchConfig& config);

// log density of N(mode, (L L')^-1) at x, L the lower Cholesky factor of the precision.
double laplace_log_density(const FitResult& fit, const Eigen::VectorXd& x);
Eigen::VectorXd laplace_draw(const FitResult& fit, Rng& rng);

// ---- repeated runs ----------------------------------------------------------

struct RunSummary {
  std::uint64_t seed = 0;
  double acceptance_rate = 0.0;  // percent
  std::size_t iterations_to_best = kNeverVisited;
};

struct ModelFrequency {
  Graph graph;
  double frequency = 0.0;
  double log_marginal = 0.0;
};

struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);

struct ExperimentResult {
  Strategy strategy = Strategy::Uniform;
  Graph best;
  bool best_exhaustive = false;  // true when best came from full enumeration
  std::vector<RunSummary> runs;
  std::vector<ModelFrequency> models;  // pooled over runs, most frequent first
  Quartiles acceptance;                // percent
  Quartiles iterations_to_best;        // runs that never reach best count as total iterations + 1
  std::size_t missed_best = 0;
};

struct ExperimentOptions {
  std::size_t runs = 30;
  unsigned threads = 1;
  // Graph to time; when unset it is the exhaustive best (P <= 5) or the
  // visited graph with the highest marginal across runs.
  std::optional<Graph> best;
};

// Run r uses seed config.seed + r.
ExperimentResult run_experiment(MarginalCache& cache, const TGammaMatrix* tgamma,
                                const SearchConfig& config, const ExperimentOptions& options);

// Generator notation using covariate names: single-character names are
// concatenated within a clique, longer names joined by ':'.
std::string describe_model(const Graph& g, const std::vector<std::string>& names);

// Table-style text block and CSV of the top models.
std::string format_experiment(const ExperimentResult& result, const std::vector<std::string>& names,
                              std::size_t top = 3);
void write_models_csv(const ExperimentResult& result, const std::vector<std::string>& names,
                      const std::filesystem::path& path, std::size_t top = 3);
void write_runs_csv(const ExperimentResult& result, const std::filesystem::path& path);

}  // namespace catgraph
