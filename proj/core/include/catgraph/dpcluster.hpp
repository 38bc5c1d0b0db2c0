#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "catgraph/dataset.hpp"
#include "catgraph/rng.hpp"

namespace catgraph {

// Hyperparameters of the variable-selection DP mixture.
struct PriorConfig {
  double lambda = 0.5;       // symmetric Dirichlet on every phi^c_p
  double rho_a = 1.0;        // Beta(rho_a, rho_b) slab for rho_p
  double rho_b = 1.0;
  double atom_weight = 0.5;  // P(w_p = 1)
  double alpha_shape = 2.0;  // Gamma(shape, rate) hyperprior on alpha
  double alpha_rate = 1.0;
  int max_clusters = 50;     // truncation level of the stick-breaking prior
  int initial_groups = 10;   // subjects start spread uniformly over this many clusters

  void validate() const;
};

struct SamplerOptions {
  // Pin every gamma^c_p to 0: the likelihood no longer depends on allocations.
  bool fix_gamma_zero = false;
  bool record_allocations = true;
  bool record_phi = true;
};

// Full state of the truncated stick-breaking sampler.
struct ClusterState {
  int clusters = 0;
  std::vector<int> levels;
  std::vector<int> offsets;        // offsets[p] into a cluster's phi block; offsets[P] = sum M_p
  std::vector<int> z;              // allocation per subject
  std::vector<double> V;           // stick fractions; V[C-1] = 1
  std::vector<double> psi;         // psi_c = V_c prod_{l<c} (1 - V_l)
  std::vector<double> phi;         // clusters x offsets[P]
  std::vector<std::uint8_t> gamma; // clusters x P
  std::vector<double> rho;         // per covariate
  std::vector<std::uint8_t> w;     // atom indicators; rho_p == 0 iff w_p == 0
  double alpha = 1.0;

  std::size_t P() const { return levels.size(); }
  double phi_at(int c, std::size_t p, int x) const {
    return phi[static_cast<std::size_t>(c * offsets.back() + offsets[p] + x)];
  }
  std::uint8_t gamma_at(int c, std::size_t p) const {
    return gamma[static_cast<std::size_t>(c) * P() + p];
  }
  std::vector<std::int64_t> sizes() const;
  int occupied() const;

  // Throws NumericalError naming the first violated invariant.
  void check_invariants() const;
};

// Mixture kernel for subject i in cluster c:
// prod_p phi^c_p(x_ip)^gamma * pi_p(x_ip)^(1 - gamma).
double likelihood_contribution(const ClusterState& state, const CategoricalDataset& data,
                               const MarginalFrequencies& marginals, std::size_t i, int c);

// One Gibbs sweep over a fixed dataset. Subjects sharing a covariate pattern
// share their allocation probabilities, so the z step costs one likelihood
// evaluation per distinct pattern.
class DpSampler {
 public:
  DpSampler(const CategoricalDataset& data, MarginalFrequencies marginals, PriorConfig priors,
            SamplerOptions options = {});

  // Random start: subjects spread uniformly over initial_groups clusters,
  // sticks drawn given that allocation, every covariate selected in every
  // cluster, and rho, alpha and phi from the prior.
  ClusterState initial_state(Rng& rng) const;
  void sweep(ClusterState& state, Rng& rng) const;

  const MarginalFrequencies& marginals() const { return marginals_; }
  const PriorConfig& priors() const { return priors_; }

 private:
  void update_allocations(ClusterState& s, Rng& rng) const;
  void update_sticks(ClusterState& s, const std::vector<std::int64_t>& sizes, Rng& rng) const;
  void update_selection(ClusterState& s, const std::vector<std::int64_t>& sizes, Rng& rng) const;
  void update_alpha(ClusterState& s, Rng& rng) const;

  const CategoricalDataset* data_;
  MarginalFrequencies marginals_;
  PriorConfig priors_;
  SamplerOptions options_;
  std::vector<int> offsets_;
  std::vector<double> log_pi_;          // flattened like a phi block
  std::vector<std::vector<int>> patterns_;
  std::vector<std::size_t> pattern_of_;  // subject -> pattern
};

void gibbs_sweep(ClusterState& state, const CategoricalDataset& data,
                 const MarginalFrequencies& marginals, const PriorConfig& priors, Rng& rng,
                 const SamplerOptions& options = {});

// A draw of every parameter from the prior for n subjects.
ClusterState draw_from_prior(std::size_t n, std::span<const int> levels, const PriorConfig& priors,
                             Rng& rng);

// Covariates drawn from the model given the state, with pi held fixed.
CategoricalDataset simulate_covariates(const ClusterState& state,
                                       const MarginalFrequencies& marginals, Rng& rng);

// ---- trace -----------------------------------------------------------------

struct TraceCluster {
  int label = 0;  // index within the truncated state
  std::int64_t size = 0;
  double psi = 0.0;
  std::vector<std::uint8_t> gamma;  // P
  std::vector<double> phi;          // sum M_p, empty when phi is not recorded
};

struct TraceDraw {
  std::size_t sweep = 0;  // 1-based sweep number, burn-in included
  double alpha = 0.0;
  double last_stick = 0.0;  // psi of the final (truncation) cluster
  std::vector<double> rho;
  std::vector<std::uint8_t> w;
  std::vector<TraceCluster> clusters;  // occupied clusters only
  std::vector<int> z;                  // empty when allocations are not recorded
};

struct ClusterTrace {
  std::size_t n = 0;
  std::vector<int> levels;
  std::vector<std::string> names;
  MarginalFrequencies marginals;
  std::uint64_t seed = 0;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::vector<TraceDraw> draws;

  std::size_t P() const { return levels.size(); }
  std::size_t size() const { return draws.size(); }
  bool has_allocations() const { return !draws.empty() && !draws.front().z.empty(); }
  std::vector<int> phi_offsets() const;
};

struct ChainSettings {
  std::size_t burnin = 1000;
  std::size_t iterations = 2000;  // sweeps after burn-in
  std::size_t thin = 1;           // keep every thin-th post burn-in sweep
  std::uint64_t seed = 1;
  SamplerOptions options;
};

// Deterministic in the seed. Retains ceil(iterations / thin) draws.
ClusterTrace run_chain(const CategoricalDataset& data, const PriorConfig& priors,
                       const ChainSettings& settings);

struct RhoSummary {
  double median = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  double mean = 0.0;
};

std::vector<RhoSummary> posterior_rho_summary(const ClusterTrace& trace);

// Linear-interpolation empirical quantile (type 7). Sorts a copy.
double empirical_quantile(std::vector<double> values, double q);

// Trace file: a first line "# " + JSON metadata, then CSV rows tagged by kind:
//   R,sweep,alpha,K,last_stick,rho_1..rho_P,w_1..w_P        one per draw
//   C,sweep,label,size,psi,gamma_1..gamma_P,phi...           one per draw x occupied cluster
//   Z,sweep,z_1..z_n                                         one per draw (optional)
void write_trace(const ClusterTrace& trace, const std::filesystem::path& path);
ClusterTrace read_trace(const std::filesystem::path& path);

}  // namespace catgraph
