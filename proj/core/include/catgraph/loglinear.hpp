#pragma once

#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "catgraph/dataset.hpp"
#include "catgraph/graph.hpp"

namespace catgraph {

// A log-linear term: sorted covariate indices. The empty term is the intercept.
using Term = std::vector<int>;

// Terms of the graphical model: every subset of every maximal clique, with
// the intercept and all main effects always present. Ordered by size, then
// lexicographically.
std::vector<Term> graphical_terms(const Graph& graph);

// Graphical Poisson log-linear model with corner-point coding: level 0 is the
// baseline of each covariate; a term S contributes one column per tuple of
// non-baseline levels, enumerated with the last covariate fastest.
class LogLinearModel {
 public:
  LogLinearModel(Graph graph, std::vector<int> levels);

  const Graph& graph() const { return graph_; }
  const std::vector<Term>& terms() const { return terms_; }
  std::span<const int> levels() const { return levels_; }
  std::size_t column_count() const { return columns_; }
  // First design column of terms()[t].
  std::size_t term_offset(std::size_t t) const { return offsets_[t]; }
  std::size_t term_columns(std::size_t t) const;
  // Index into terms(), or npos.
  std::size_t find_term(const Term& term) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  Graph graph_;
  std::vector<int> levels_;
  std::vector<Term> terms_;
  std::vector<std::size_t> offsets_;
  std::size_t columns_ = 0;
};

// cells x columns, rows in contingency-table order.
Eigen::MatrixXd design_matrix(const LogLinearModel& model);

// Unit-information normal prior on the non-intercept coefficients:
// covariance = scale * T * (Zc' Zc)^-1, where T is the number of cells and Zc
// the column-centred non-intercept design. This is the non-intercept block of
// scale * T * (X'X)^-1. The intercept has a flat prior.
struct PriorSettings {
  double scale = 1.0;
};

struct LogPosteriorValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// Log posterior kernel for a model and a table over the same covariates.
// Poisson log-likelihood sum(y * eta - exp(eta)) with the log(y!) constants
// dropped, plus the normalized log prior density of the non-intercept block.
class PoissonPosterior {
 public:
  PoissonPosterior(const LogLinearModel& model, const ContingencyTable& table,
                   PriorSettings prior = {});

  std::size_t dimension() const { return static_cast<std::size_t>(design_.cols()); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& counts() const { return counts_; }
  const Eigen::MatrixXd& prior_precision() const { return precision_; }

  double log_likelihood(const Eigen::VectorXd& beta) const;
  double log_prior(const Eigen::VectorXd& beta) const;
  double log_density(const Eigen::VectorXd& beta) const;
  LogPosteriorValue evaluate(const Eigen::VectorXd& beta) const;
  // X' diag(exp(eta)) X + blockdiag(0, precision).
  Eigen::MatrixXd negative_hessian(const Eigen::VectorXd& beta) const;

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd counts_;
  Eigen::MatrixXd precision_;
  double log_prior_norm_ = 0.0;
};

struct FitResult {
  Eigen::VectorXd mode;
  double log_posterior = 0.0;
  double log_det_neg_hessian = 0.0;
  double log_marginal = 0.0;  // Laplace approximation
  int iterations = 0;
  // Lower Cholesky factor of the negative Hessian at the mode.
  Eigen::MatrixXd cholesky;
};

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
};

// Damped Newton to the posterior mode, then the Laplace log marginal
// likelihood log p(mode) + k/2 log(2 pi) - 1/2 log det(-H).
FitResult fit(const PoissonPosterior& posterior, const FitOptions& options = {});
FitResult fit(const LogLinearModel& model, const ContingencyTable& table, PriorSettings prior = {},
              const FitOptions& options = {});

// Laplace fits keyed by graph, for a fixed table. Concurrent readers share a
// lock; insertion takes it exclusively. Unless full models are kept, entries
// hold only the mode and marginal (no design matrix or Cholesky factor) and
// model() rebuilds the posterior on demand.
class MarginalCache {
 public:
  explicit MarginalCache(ContingencyTable table, PriorSettings prior = {},
                         bool keep_full_models = false);

  struct Model {
    std::shared_ptr<const PoissonPosterior> posterior;
    std::shared_ptr<const FitResult> fit;
  };

  // Throws NumericalError when the fit for this graph failed.
  Model model(const Graph& graph);
  std::shared_ptr<const FitResult> get(const Graph& graph) { return model(graph).fit; }
  double log_marginal(const Graph& graph) { return get(graph)->log_marginal; }

  const ContingencyTable& table() const { return table_; }
  const PriorSettings& prior() const { return prior_; }
  std::size_t size() const;

 private:
  struct Entry {
    Model model;
    std::string error;
  };

  ContingencyTable table_;
  PriorSettings prior_;
  bool keep_full_ = false;
  mutable std::shared_mutex mutex_;
  std::unordered_map<Graph, Entry, GraphHash> entries_;
};

}  // namespace catgraph
