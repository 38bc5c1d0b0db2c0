#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catgraph/graph.hpp"
#include "catgraph/loglinear.hpp"
#include "catgraph/rng.hpp"

namespace catgraph {

// A finite mixture of the variable-selection kernel with pi consistent with
// the mixture: pi_p(x) = sum_c psi_c phi#^c_p(x).
class MixtureSpec {
 public:
  // Solves for pi: pi_p = sum_{gamma=1} psi phi / sum_{gamma=1} psi. A
  // covariate switched off in every cluster has a free pi; free_pi supplies it
  // (per covariate, ignored otherwise) or it defaults to uniform.
  MixtureSpec(std::vector<int> levels, std::vector<double> psi, std::vector<std::uint8_t> gamma,
              std::vector<std::vector<std::vector<double>>> phi,
              std::vector<std::vector<double>> free_pi = {});

  std::size_t P() const { return levels_.size(); }
  std::size_t C() const { return psi_.size(); }
  const std::vector<int>& levels() const { return levels_; }
  double psi(std::size_t c) const { return psi_[c]; }
  bool gamma(std::size_t c, std::size_t p) const { return gamma_[c * P() + p] != 0; }
  double phi(std::size_t c, std::size_t p, int x) const { return phi_[c][p][static_cast<std::size_t>(x)]; }
  double pi(std::size_t p, int x) const { return pi_[p][static_cast<std::size_t>(x)]; }
  double kernel(std::size_t c, std::size_t p, int x) const { return gamma(c, p) ? phi(c, p, x) : pi(p, x); }
  // sum_c gamma^c_p gamma^c_q
  int gamma_product(std::size_t p, std::size_t q) const;

 private:
  std::vector<int> levels_;
  std::vector<double> psi_;
  std::vector<std::uint8_t> gamma_;
  std::vector<std::vector<std::vector<double>>> phi_;
  std::vector<std::vector<double>> pi_;
};

enum class Hypothesis {
  None,
  DisjointPair,   // no cluster selects both p and q
  IsolatedSet,    // any cluster selecting p selects nothing else
  NeverSelected,  // p is switched off in every cluster
};

struct RandomSpecOptions {
  int max_covariates = 4;
  int max_levels = 3;
  int max_clusters = 5;
  double phi_concentration = 0.5;
};

// Random spec satisfying the hypothesis for covariate p (and q for DisjointPair).
MixtureSpec random_spec(Rng& rng, Hypothesis hypothesis, std::size_t& p, std::size_t& q,
                        const RandomSpecOptions& options = {});

inline constexpr std::size_t kMaxJointCells = 1000000;

// P(x_S) over the cells of S, last listed covariate fastest.
std::vector<double> joint_distribution(const MixtureSpec& spec, const std::vector<std::size_t>& subset);

// max over (x, x') of |P(x_p = x, x_q = x') - P(x_p = x) P(x_q = x')|.
double dependence_gap(const MixtureSpec& spec, std::size_t p, std::size_t q);
// max over full cells of |P(x_p, x_-p) - P(x_p) P(x_-p)|.
double set_independence_gap(const MixtureSpec& spec, std::size_t p);
// max over x of |sum_G psi_c phi^c_p(x) - pi_p(x) sum_G psi_c| where G is the
// set of clusters selecting p but not q.
double pivotal_identity_gap(const MixtureSpec& spec, std::size_t p, std::size_t q);

// Three binary covariates, four equally weighted clusters whose profiles sit
// on the even-parity patterns: pairwise independent, jointly dependent.
MixtureSpec parity_witness();
// Two covariates selected together in one cluster with phi equal to pi.
MixtureSpec flat_profile_witness();

struct TheoremCheck {
  std::size_t trials = 0;
  double max_gap = 0.0;       // largest independence gap seen
  double max_identity = 0.0;  // largest pivotal-identity residual (pairwise checks only)
};

// Random specs under the hypothesis of the pairwise result, the set result,
// or the never-selected corollary.
TheoremCheck check_pairwise(std::size_t trials, std::uint64_t seed);
TheoremCheck check_set(std::size_t trials, std::uint64_t seed);
TheoremCheck check_corollary(std::size_t trials, std::uint64_t seed);

// ---- model posterior --------------------------------------------------------

inline constexpr int kMaxEnumerationNodes = 5;

// Every graph on P nodes, in bitset order.
std::vector<Graph> all_graphs(int P);

struct ModelPosterior {
  std::vector<Graph> graphs;
  std::vector<double> log_marginal;
  std::vector<double> probability;  // uniform model prior
  std::vector<std::string> warnings;

  std::size_t best() const;
  double probability_of(const Graph& g) const;
};

ModelPosterior exhaustive_model_posterior(MarginalCache& cache);
ModelPosterior exhaustive_model_posterior(const ContingencyTable& table, PriorSettings prior = {});

}  // namespace catgraph
