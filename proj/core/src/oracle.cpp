#include "catgraph/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "catgraph/error.hpp"

namespace catgraph {

MixtureSpec::MixtureSpec(std::vector<int> levels, std::vector<double> psi,
                         std::vector<std::uint8_t> switches,
                         std::vector<std::vector<std::vector<double>>> phi,
                         std::vector<std::vector<double>> free_pi)
    : levels_(std::move(levels)), psi_(std::move(psi)), gamma_(std::move(switches)), phi_(std::move(phi)) {
  const std::size_t C = psi_.size(), P = levels_.size();
  if (C == 0 || P == 0) throw ConfigError("mixture needs clusters and covariates");
  if (gamma_.size() != C * P || phi_.size() != C) throw ConfigError("mixture arrays disagree in size");
  double total = 0.0;
  for (double v : psi_) {
    if (!(v >= 0.0)) throw ConfigError("mixture weights must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
  for (std::size_t c = 0; c < C; ++c) {
    if (phi_[c].size() != P) throw ConfigError("phi has the wrong number of covariates");
    for (std::size_t p = 0; p < P; ++p) {
      if (phi_[c][p].size() != static_cast<std::size_t>(levels_[p])) throw ConfigError("phi has the wrong length");
      const double s = std::accumulate(phi_[c][p].begin(), phi_[c][p].end(), 0.0);
      if (std::abs(s - 1.0) > 1e-12) throw ConfigError("phi is not a probability vector");
    }
  }
  pi_.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    const auto M = static_cast<std::size_t>(levels_[p]);
    double mass = 0.0;
    std::vector<double> acc(M, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      if (!gamma(c, p)) continue;
      mass += psi_[c];
      for (std::size_t x = 0; x < M; ++x) acc[x] += psi_[c] * phi_[c][p][x];
    }
    if (mass > 0.0) {
      for (auto& v : acc) v /= mass;
      pi_[p] = std::move(acc);
    } else if (p < free_pi.size() && free_pi[p].size() == M) {
      pi_[p] = free_pi[p];
    } else {
      pi_[p].assign(M, 1.0 / static_cast<double>(M));
    }
  }
}

int MixtureSpec::gamma_product(std::size_t p, std::size_t q) const {
  int s = 0;
  for (std::size_t c = 0; c < C(); ++c) s += gamma(c, p) && gamma(c, q);
  return s;
}

MixtureSpec random_spec(Rng& rng, Hypothesis hypothesis, std::size_t& p, std::size_t& q,
                        const RandomSpecOptions& options) {
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); };
  const int P = pick(2, std::max(2, options.max_covariates));
  const int C = pick(1, std::max(1, options.max_clusters));
  std::vector<int> levels(static_cast<std::size_t>(P));
  for (auto& m : levels) m = pick(2, std::max(2, options.max_levels));
  p = static_cast<std::size_t>(pick(0, P - 1));
  q = static_cast<std::size_t>(pick(0, P - 2));
  if (q >= p) ++q;

  std::vector<double> psi(static_cast<std::size_t>(C));
  std::vector<double> ones(static_cast<std::size_t>(C), 1.0);
  rng.dirichlet(ones, psi);
  const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
  for (auto& v : psi) v /= total;

  const auto Pu = static_cast<std::size_t>(P);
  std::vector<std::uint8_t> gamma(static_cast<std::size_t>(C) * Pu);
  for (auto& g : gamma) g = rng.bernoulli(0.5);
  for (std::size_t c = 0; c < static_cast<std::size_t>(C); ++c) {
    auto* row = gamma.data() + c * Pu;
    switch (hypothesis) {
      case Hypothesis::DisjointPair:
        if (row[p] && row[q]) (rng.bernoulli(0.5) ? row[p] : row[q]) = 0;
        break;
      case Hypothesis::IsolatedSet:
        if (row[p])
          for (std::size_t r = 0; r < Pu; ++r)
            if (r != p) row[r] = 0;
        break;
      case Hypothesis::NeverSelected:
        row[p] = 0;
        break;
      case Hypothesis::None:
        break;
    }
  }

  std::vector<std::vector<std::vector<double>>> phi(static_cast<std::size_t>(C));
  std::vector<std::vector<double>> free_pi(Pu);
  for (std::size_t r = 0; r < Pu; ++r) {
    std::vector<double> conc(static_cast<std::size_t>(levels[r]), 1.0);
    free_pi[r].resize(conc.size());
    rng.dirichlet(conc, free_pi[r]);
  }
  for (auto& cluster : phi) {
    cluster.resize(Pu);
    for (std::size_t r = 0; r < Pu; ++r) {
      std::vector<double> conc(static_cast<std::size_t>(levels[r]), options.phi_concentration);
      cluster[r].resize(conc.size());
      rng.dirichlet(conc, cluster[r]);
    }
  }
  // Renormalize so every simplex sums to 1 to the last bit the constructor checks.
  auto renorm = [](std::vector<double>& v) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= s;
  };
  for (auto& cluster : phi)
    for (auto& v : cluster) renorm(v);
  for (auto& v : free_pi) renorm(v);
  return MixtureSpec(std::move(levels), std::move(psi), std::move(gamma), std::move(phi), std::move(free_pi));
}

std::vector<double> joint_distribution(const MixtureSpec& spec, const std::vector<std::size_t>& subset) {
  std::size_t cells = 1;
  for (auto p : subset) {
    if (p >= spec.P()) throw ConfigError("covariate index out of range");
    cells *= static_cast<std::size_t>(spec.levels()[p]);
    if (cells > kMaxJointCells) throw ConfigError("joint distribution exceeds the size guard");
  }
  std::vector<double> out(cells, 0.0);
  std::vector<int> x(subset.size(), 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double total = 0.0;
    for (std::size_t c = 0; c < spec.C(); ++c) {
      double term = spec.psi(c);
      for (std::size_t k = 0; k < subset.size(); ++k) term *= spec.kernel(c, subset[k], x[k]);
      total += term;
    }
    out[cell] = total;
    for (std::size_t k = subset.size(); k-- > 0;) {
      if (++x[k] < spec.levels()[subset[k]]) break;
      x[k] = 0;
    }
  }
  return out;
}

double dependence_gap(const MixtureSpec& spec, std::size_t p, std::size_t q) {
  const auto joint = joint_distribution(spec, {p, q});
  const auto Mp = static_cast<std::size_t>(spec.levels()[p]);
  const auto Mq = static_cast<std::size_t>(spec.levels()[q]);
  std::vector<double> mp(Mp, 0.0), mq(Mq, 0.0);
  for (std::size_t a = 0; a < Mp; ++a)
    for (std::size_t b = 0; b < Mq; ++b) {
      mp[a] += joint[a * Mq + b];
      mq[b] += joint[a * Mq + b];
    }
  double gap = 0.0;
  for (std::size_t a = 0; a < Mp; ++a)
    for (std::size_t b = 0; b < Mq; ++b) gap = std::max(gap, std::abs(joint[a * Mq + b] - mp[a] * mq[b]));
  return gap;
}

double set_independence_gap(const MixtureSpec& spec, std::size_t p) {
  std::vector<std::size_t> order{p};
  for (std::size_t r = 0; r < spec.P(); ++r)
    if (r != p) order.push_back(r);
  const auto joint = joint_distribution(spec, order);
  const auto Mp = static_cast<std::size_t>(spec.levels()[p]);
  const std::size_t rest = joint.size() / Mp;
  std::vector<double> mp(Mp, 0.0), mr(rest, 0.0);
  for (std::size_t a = 0; a < Mp; ++a)
    for (std::size_t b = 0; b < rest; ++b) {
      mp[a] += joint[a * rest + b];
      mr[b] += joint[a * rest + b];
    }
  double gap = 0.0;
  for (std::size_t a = 0; a < Mp; ++a)
    for (std::size_t b = 0; b < rest; ++b) gap = std::max(gap, std::abs(joint[a * rest + b] - mp[a] * mr[b]));
  return gap;
}

double pivotal_identity_gap(const MixtureSpec& spec, std::size_t p, std::size_t q) {
  double gap = 0.0;
  for (int x = 0; x < spec.levels()[p]; ++x) {
    double weighted = 0.0, mass = 0.0;
    for (std::size_t c = 0; c < spec.C(); ++c) {
      if (!spec.gamma(c, p) || spec.gamma(c, q)) continue;
      weighted += spec.psi(c) * spec.phi(c, p, x);
      mass += spec.psi(c);
    }
    gap = std::max(gap, std::abs(weighted - spec.pi(p, x) * mass));
  }
  return gap;
}

MixtureSpec parity_witness() {
  const int patterns[4][3] = {{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  std::vector<std::vector<std::vector<double>>> phi(4, std::vector<std::vector<double>>(3));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t p = 0; p < 3; ++p)
      phi[c][p] = patterns[c][p] == 0 ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.1, 0.9};
  return MixtureSpec({2, 2, 2}, {0.25, 0.25, 0.25, 0.25}, std::vector<std::uint8_t>(12, 1), std::move(phi));
}

MixtureSpec flat_profile_witness() {
  // One cluster, so the consistent pi is phi itself. Dyadic values keep the
  // joint and its margins exact in floating point.
  std::vector<std::vector<std::vector<double>>> phi{{{0.25, 0.75}, {0.25, 0.5, 0.25}}};
  return MixtureSpec({2, 3}, {1.0}, {1, 1}, std::move(phi));
}

namespace {

TheoremCheck run_check(std::size_t trials, std::uint64_t seed, Hypothesis h) {
  Rng rng(seed);
  TheoremCheck out;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t p = 0, q = 0;
    const MixtureSpec spec = random_spec(rng, h, p, q);
    if (h == Hypothesis::DisjointPair) {
      out.max_gap = std::max(out.max_gap, dependence_gap(spec, p, q));
      out.max_identity = std::max({out.max_identity, pivotal_identity_gap(spec, p, q),
                                   pivotal_identity_gap(spec, q, p)});
    } else {
      out.max_gap = std::max(out.max_gap, set_independence_gap(spec, p));
    }
    ++out.trials;
  }
  return out;
}

}  // namespace

TheoremCheck check_pairwise(std::size_t trials, std::uint64_t seed) {
  return run_check(trials, seed, Hypothesis::DisjointPair);
}
TheoremCheck check_set(std::size_t trials, std::uint64_t seed) {
  return run_check(trials, seed, Hypothesis::IsolatedSet);
}
TheoremCheck check_corollary(std::size_t trials, std::uint64_t seed) {
  return run_check(trials, seed, Hypothesis::NeverSelected);
}

// ---- model posterior --------------------------------------------------------

std::vector<Graph> all_graphs(int P) {
  if (P < 1 || P > kMaxEnumerationNodes)
    throw ConfigError("exhaustive enumeration supports 1 to " + std::to_string(kMaxEnumerationNodes) + " covariates");
  const std::size_t H = static_cast<std::size_t>(P * (P - 1) / 2);
  std::vector<Graph> out;
  out.reserve(std::size_t{1} << H);
  for (std::size_t mask = 0; mask < (std::size_t{1} << H); ++mask) {
    Graph g(P);
    for (std::size_t k = 0; k < H; ++k)
      if (mask >> k & 1) g.add_edge(Graph::pair_at(k, P));
    out.push_back(std::move(g));
  }
  return out;
}

std::size_t ModelPosterior::best() const {
  return static_cast<std::size_t>(std::max_element(probability.begin(), probability.end()) - probability.begin());
}

double ModelPosterior::probability_of(const Graph& g) const {
  for (std::size_t k = 0; k < graphs.size(); ++k)
    if (graphs[k] == g) return probability[k];
  return 0.0;
}

ModelPosterior exhaustive_model_posterior(MarginalCache& cache) {
  const int P = static_cast<int>(cache.table().levels.size());
  ModelPosterior out;
  for (auto& g : all_graphs(P)) {
    try {
      const double lm = cache.log_marginal(g);
      out.graphs.push_back(std::move(g));
      out.log_marginal.push_back(lm);
    } catch (const NumericalError& e) {
      out.warnings.push_back(format_model(g) + ": " + e.what());
    }
  }
  if (out.graphs.empty()) throw NumericalError("every model fit failed");
  const double top = *std::max_element(out.log_marginal.begin(), out.log_marginal.end());
  double total = 0.0;
  for (double lm : out.log_marginal) total += std::exp(lm - top);
  for (double lm : out.log_marginal) out.probability.push_back(std::exp(lm - top) / total);
  return out;
}

ModelPosterior exhaustive_model_posterior(const ContingencyTable& table, PriorSettings prior) {
  MarginalCache cache(table, prior);
  return exhaustive_model_posterior(cache);
}

}  // namespace catgraph
