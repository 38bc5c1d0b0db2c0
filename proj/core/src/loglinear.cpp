#include "catgraph/loglinear.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <set>

#include "catgraph/error.hpp"

namespace catgraph {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool term_less(const Term& a, const Term& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

std::vector<Term> graphical_terms(const Graph& graph) {
  std::set<Term, decltype(&term_less)> terms(&term_less);
  terms.insert(Term{});
  for (const auto& clique : maximal_cliques(graph)) {
    if (clique.size() > 24) throw ConfigError("clique too large for a log-linear term list");
    const std::size_t subsets = std::size_t{1} << clique.size();
    for (std::size_t mask = 1; mask < subsets; ++mask) {
      Term t;
      for (std::size_t j = 0; j < clique.size(); ++j)
        if (mask & (std::size_t{1} << j)) t.push_back(clique[j]);
      terms.insert(std::move(t));
    }
  }
  return {terms.begin(), terms.end()};
}

LogLinearModel::LogLinearModel(Graph graph, std::vector<int> levels)
    : graph_(std::move(graph)), levels_(std::move(levels)) {
  if (static_cast<int>(levels_.size()) != graph_.nodes())
    throw ConfigError("model levels must have one entry per graph node");
  for (int m : levels_)
    if (m < 2) throw ConfigError("every covariate needs at least two levels");
  terms_ = graphical_terms(graph_);
  offsets_.reserve(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    offsets_.push_back(columns_);
    columns_ += term_columns(t);
  }
}

std::size_t LogLinearModel::term_columns(std::size_t t) const {
  std::size_t c = 1;
  for (int p : terms_[t]) c *= static_cast<std::size_t>(levels_[static_cast<std::size_t>(p)] - 1);
  return c;
}

std::size_t LogLinearModel::find_term(const Term& term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term, term_less);
  if (it == terms_.end() || *it != term) return npos;
  return static_cast<std::size_t>(it - terms_.begin());
}

Eigen::MatrixXd design_matrix(const LogLinearModel& model) {
  const auto levels = model.levels();
  const std::size_t cells = cell_count(levels);
  const auto& terms = model.terms();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells),
                                            static_cast<Eigen::Index>(model.column_count()));
  std::vector<int> cell(levels.size(), 0);
  for (std::size_t row = 0; row < cells; ++row) {
    for (std::size_t t = 0; t < terms.size(); ++t) {
      // A row hits exactly one column of a term when all its members are off baseline.
      std::size_t col = 0;
      bool active = true;
      for (int p : terms[t]) {
        const int l = cell[static_cast<std::size_t>(p)];
        if (l == 0) {
          active = false;
          break;
        }
        col = col * static_cast<std::size_t>(levels[static_cast<std::size_t>(p)] - 1) +
              static_cast<std::size_t>(l - 1);
      }
      if (active)
        x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(model.term_offset(t) + col)) = 1.0;
    }
    // Advance the cell, last covariate fastest.
    for (std::size_t p = levels.size(); p-- > 0;) {
      if (++cell[p] < levels[p]) break;
      cell[p] = 0;
    }
  }
  return x;
}

PoissonPosterior::PoissonPosterior(const LogLinearModel& model, const ContingencyTable& table,
                                   PriorSettings prior) {
  if (!std::equal(table.levels.begin(), table.levels.end(), model.levels().begin(),
                  model.levels().end()))
    throw ConfigError("table dimensions do not match the model covariates");
  if (!(prior.scale > 0.0)) throw ConfigError("prior scale must be positive");
  design_ = design_matrix(model);
  counts_.resize(static_cast<Eigen::Index>(table.counts.size()));
  for (std::size_t i = 0; i < table.counts.size(); ++i)
    counts_[static_cast<Eigen::Index>(i)] = static_cast<double>(table.counts[i]);

  const Eigen::Index k = design_.cols();
  const double cells = static_cast<double>(design_.rows());
  const Eigen::MatrixXd z = design_.rightCols(k - 1);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::MatrixXd zc = z.rowwise() - mean;
  precision_ = (zc.transpose() * zc) / (prior.scale * cells);
  Eigen::LLT<Eigen::MatrixXd> llt(precision_);
  if (llt.info() != Eigen::Success)
    throw NumericalError("prior precision is singular: design matrix is rank deficient");
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  log_prior_norm_ = 0.5 * logdet - 0.5 * static_cast<double>(k - 1) * kLog2Pi;
}

double PoissonPosterior::log_likelihood(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd eta = design_ * beta;
  return counts_.dot(eta) - eta.array().exp().sum();
}

double PoissonPosterior::log_prior(const Eigen::VectorXd& beta) const {
  const auto rest = beta.tail(beta.size() - 1);
  return log_prior_norm_ - 0.5 * rest.dot(precision_ * rest);
}

double PoissonPosterior::log_density(const Eigen::VectorXd& beta) const {
  const double v = log_likelihood(beta) + log_prior(beta);
  if (!std::isfinite(v)) throw NumericalError("log posterior is not finite");
  return v;
}

LogPosteriorValue PoissonPosterior::evaluate(const Eigen::VectorXd& beta) const {
  if (beta.size() != design_.cols()) throw ConfigError("coefficient vector has the wrong length");
  const Eigen::VectorXd eta = design_ * beta;
  const Eigen::VectorXd mu = eta.array().exp();
  const auto rest = beta.tail(beta.size() - 1);
  const Eigen::VectorXd prec_rest = precision_ * rest;

  LogPosteriorValue out;
  out.value = counts_.dot(eta) - mu.sum() + log_prior_norm_ - 0.5 * rest.dot(prec_rest);
  out.gradient = design_.transpose() * (counts_ - mu);
  out.gradient.tail(beta.size() - 1) -= prec_rest;
  if (!std::isfinite(out.value) || !out.gradient.allFinite())
    throw NumericalError("log posterior or gradient is not finite");
  return out;
}

Eigen::MatrixXd PoissonPosterior::negative_hessian(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd mu = (design_ * beta).array().exp();
  Eigen::MatrixXd h = design_.transpose() * mu.asDiagonal() * design_;
  const Eigen::Index k = design_.cols();
  h.bottomRightCorner(k - 1, k - 1) += precision_;
  return h;
}

FitResult fit(const PoissonPosterior& posterior, const FitOptions& options) {
  const Eigen::Index k = static_cast<Eigen::Index>(posterior.dimension());
  const double total = posterior.counts().sum();
  if (!(total > 0.0)) throw NumericalError("cannot fit a table with zero total count");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  beta[0] = std::log(total / static_cast<double>(posterior.counts().size()));
  auto current = posterior.evaluate(beta);
  double grad_norm = current.gradient.lpNorm<Eigen::Infinity>();

  FitResult result;
  int iter = 0;
  for (; iter < options.max_iterations && grad_norm >= options.gradient_tolerance; ++iter) {
    const Eigen::MatrixXd h = posterior.negative_hessian(beta);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("negative Hessian is not positive definite");
    const Eigen::VectorXd step = llt.solve(current.gradient);

    double t = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = beta + t * step;
      try {
        auto next = posterior.evaluate(trial);
        if (next.value >= current.value - 1e-12 * std::abs(current.value)) {
          beta = trial;
          current = std::move(next);
          moved = true;
          break;
        }
      } catch (const NumericalError&) {
        // Overflow along the step: shrink it.
      }
    }
    grad_norm = current.gradient.lpNorm<Eigen::Infinity>();
    if (!moved) break;
  }
  if (!(grad_norm < options.gradient_tolerance))
    throw NumericalError("Newton iteration did not converge after " + std::to_string(iter) +
                         " iterations (gradient norm " + std::to_string(grad_norm) + ")");

  const Eigen::MatrixXd h = posterior.negative_hessian(beta);
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalError("Hessian at the mode is not negative definite");
  result.cholesky = llt.matrixL();
  result.log_det_neg_hessian = 2.0 * result.cholesky.diagonal().array().log().sum();
  result.mode = beta;
  result.log_posterior = current.value;
  result.iterations = iter;
  result.log_marginal =
      result.log_posterior + 0.5 * static_cast<double>(k) * kLog2Pi - 0.5 * result.log_det_neg_hessian;
  if (!std::isfinite(result.log_marginal)) throw NumericalError("Laplace approximation is not finite");
  return result;
}

FitResult fit(const LogLinearModel& model, const ContingencyTable& table, PriorSettings prior,
              const FitOptions& options) {
  return fit(PoissonPosterior(model, table, prior), options);
}

MarginalCache::MarginalCache(ContingencyTable table, PriorSettings prior, bool keep_full_models)
    : table_(std::move(table)), prior_(prior), keep_full_(keep_full_models) {}

MarginalCache::Model MarginalCache::model(const Graph& graph) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(graph); it != entries_.end()) {
      if (!it->second.error.empty()) throw NumericalError(it->second.error);
      Model m = it->second.model;
      if (!m.posterior)
        m.posterior = std::make_shared<const PoissonPosterior>(LogLinearModel(graph, table_.levels),
                                                               table_, prior_);
      return m;
    }
  }
  Entry entry;
  Model full;
  try {
    auto posterior = std::make_shared<const PoissonPosterior>(LogLinearModel(graph, table_.levels),
                                                              table_, prior_);
    auto result = fit(*posterior);
    if (keep_full_) {
      entry.model = {posterior, std::make_shared<const FitResult>(std::move(result))};
      full = entry.model;
    } else {
      full.posterior = posterior;
      full.fit = std::make_shared<const FitResult>(result);
      result.cholesky.resize(0, 0);
      entry.model.fit = std::make_shared<const FitResult>(std::move(result));
    }
  } catch (const NumericalError& e) {
    entry.error = e.what();
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = entries_.emplace(graph, std::move(entry));
  if (!it->second.error.empty()) throw NumericalError(it->second.error);
  if (inserted && full.fit) return full;
  Model m = it->second.model;
  if (!m.posterior)
    m.posterior = std::make_shared<const PoissonPosterior>(LogLinearModel(graph, table_.levels),
                                                           table_, prior_);
  return m;
}

std::size_t MarginalCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace catgraph
