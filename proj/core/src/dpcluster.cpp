#include "catgraph/dpcluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "catgraph/error.hpp"
#include "csv.hpp"

namespace catgraph {

using nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<int> level_offsets(std::span<const int> levels) {
  std::vector<int> off(levels.size() + 1, 0);
  for (std::size_t p = 0; p < levels.size(); ++p) off[p + 1] = off[p] + levels[p];
  return off;
}

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// log psi_c from the stick fractions.
void sticks_to_weights(ClusterState& s) {
  double log_rest = 0.0;
  for (int c = 0; c < s.clusters; ++c) {
    const double v = s.V[static_cast<std::size_t>(c)];
    s.psi[static_cast<std::size_t>(c)] = std::exp(std::log(v) + log_rest);
    if (c + 1 < s.clusters) log_rest += std::log1p(-v);
  }
}

void draw_sticks(ClusterState& s, const std::vector<std::int64_t>& sizes, Rng& rng) {
  std::int64_t above = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  for (int c = 0; c + 1 < s.clusters; ++c) {
    above -= sizes[static_cast<std::size_t>(c)];
    s.V[static_cast<std::size_t>(c)] =
        rng.beta(1.0 + static_cast<double>(sizes[static_cast<std::size_t>(c)]),
                 s.alpha + static_cast<double>(above));
  }
  s.V[static_cast<std::size_t>(s.clusters - 1)] = 1.0;
  sticks_to_weights(s);
}

void draw_phi_block(ClusterState& s, int c, std::size_t p, const double* counts, double lambda,
                    Rng& rng) {
  const int M = s.levels[p];
  std::vector<double> conc(static_cast<std::size_t>(M));
  for (int x = 0; x < M; ++x) conc[static_cast<std::size_t>(x)] = lambda + (counts ? counts[x] : 0.0);
  const std::size_t at = static_cast<std::size_t>(c * s.offsets.back() + s.offsets[p]);
  rng.dirichlet(conc, std::span<double>(s.phi.data() + at, static_cast<std::size_t>(M)));
}

ClusterState empty_state(std::size_t n, std::span<const int> levels, int clusters) {
  ClusterState s;
  s.clusters = clusters;
  s.levels.assign(levels.begin(), levels.end());
  s.offsets = level_offsets(levels);
  const std::size_t C = static_cast<std::size_t>(clusters);
  s.z.assign(n, 0);
  s.V.assign(C, 0.0);
  s.psi.assign(C, 0.0);
  s.phi.assign(C * static_cast<std::size_t>(s.offsets.back()), 0.0);
  s.gamma.assign(C * levels.size(), 0);
  s.rho.assign(levels.size(), 0.0);
  s.w.assign(levels.size(), 0);
  return s;
}

}  // namespace

void PriorConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(rho_a > 0.0) || !(rho_b > 0.0)) throw ConfigError("rho Beta parameters must be positive");
  if (!(atom_weight > 0.0 && atom_weight < 1.0))
    throw ConfigError("atom weight must lie strictly between 0 and 1");
  if (!(alpha_shape > 0.0) || !(alpha_rate > 0.0))
    throw ConfigError("alpha Gamma parameters must be positive");
  if (max_clusters < 2) throw ConfigError("max_clusters must be at least 2");
  if (initial_groups < 1) throw ConfigError("initial_groups must be at least 1");
}

std::vector<std::int64_t> ClusterState::sizes() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(clusters), 0);
  for (int c : z) ++out[static_cast<std::size_t>(c)];
  return out;
}

int ClusterState::occupied() const {
  const auto sz = sizes();
  return static_cast<int>(std::count_if(sz.begin(), sz.end(), [](std::int64_t v) { return v > 0; }));
}

void ClusterState::check_invariants() const {
  const std::size_t C = static_cast<std::size_t>(clusters);
  if (V.size() != C || psi.size() != C) throw NumericalError("stick vectors have the wrong length");
  for (int c : z)
    if (c < 0 || c >= clusters) throw NumericalError("allocation outside the truncation");
  for (std::size_t c = 0; c + 1 < C; ++c)
    if (!(V[c] > 0.0 && V[c] < 1.0)) throw NumericalError("stick fraction outside (0,1)");
  if (V[C - 1] != 1.0) throw NumericalError("final stick fraction is not 1");
  double total = 0.0;
  for (double v : psi) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw NumericalError("mixture weight is not finite");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw NumericalError("mixture weights do not sum to 1");
  const int L = offsets.back();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P(); ++p) {
      double sum = 0.0;
      for (int x = 0; x < levels[p]; ++x) {
        const double v = phi[c * static_cast<std::size_t>(L) + static_cast<std::size_t>(offsets[p] + x)];
        if (!(v >= 0.0) || !std::isfinite(v)) throw NumericalError("phi entry is not finite");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw NumericalError("phi block does not sum to 1");
    }
  for (std::size_t p = 0; p < P(); ++p) {
    if (!(rho[p] >= 0.0 && rho[p] <= 1.0)) throw NumericalError("rho outside [0,1]");
    if ((rho[p] == 0.0) != (w[p] == 0)) throw NumericalError("rho and its atom indicator disagree");
    if (w[p] == 0)
      for (std::size_t c = 0; c < C; ++c)
        if (gamma[c * P() + p]) throw NumericalError("gamma switched on with rho at zero");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw NumericalError("alpha is not positive");
}

double likelihood_contribution(const ClusterState& state, const CategoricalDataset& data,
                               const MarginalFrequencies& marginals, std::size_t i, int c) {
  double out = 1.0;
  for (std::size_t p = 0; p < data.P(); ++p) {
    const int x = data.code(i, p);
    out *= state.gamma_at(c, p) ? state.phi_at(c, p, x) : marginals(p, x);
  }
  return out;
}

// ---- sampler ---------------------------------------------------------------

DpSampler::DpSampler(const CategoricalDataset& data, MarginalFrequencies marginals,
                     PriorConfig priors, SamplerOptions options)
    : data_(&data), marginals_(std::move(marginals)), priors_(priors), options_(options) {
  priors_.validate();
  if (marginals_.P() != data.P()) throw ConfigError("marginal frequencies do not match the data");
  offsets_ = level_offsets(data.levels());
  log_pi_.assign(static_cast<std::size_t>(offsets_.back()), 0.0);
  for (std::size_t p = 0; p < data.P(); ++p) {
    if (marginals_.freq[p].size() != static_cast<std::size_t>(data.levels(p)))
      throw ConfigError("marginal frequencies do not match the level counts");
    for (int x = 0; x < data.levels(p); ++x)
      log_pi_[static_cast<std::size_t>(offsets_[p] + x)] = std::log(marginals_(p, x));
  }
  std::map<std::vector<int>, std::size_t> seen;
  pattern_of_.resize(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    auto row = data.row(i);
    std::vector<int> key(row.begin(), row.end());
    auto [it, inserted] = seen.try_emplace(std::move(key), patterns_.size());
    if (inserted) patterns_.emplace_back(row.begin(), row.end());
    pattern_of_[i] = it->second;
  }
}

ClusterState DpSampler::initial_state(Rng& rng) const {
  const int C = priors_.max_clusters;
  ClusterState s = empty_state(data_->n(), data_->levels(), C);
  const int groups = std::min(priors_.initial_groups, C);
  for (auto& zi : s.z) zi = static_cast<int>(rng.uniform() * groups);
  s.alpha = rng.gamma(priors_.alpha_shape, priors_.alpha_rate);
  draw_sticks(s, s.sizes(), rng);
  // Every covariate starts switched on with profiles drawn from the prior, so
  // the first allocation step sorts subjects by pattern.
  const bool on = !options_.fix_gamma_zero;
  for (std::size_t p = 0; p < s.P(); ++p) {
    s.w[p] = on;
    s.rho[p] = on ? rng.beta(priors_.rho_a, priors_.rho_b) : 0.0;
  }
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < s.P(); ++p) {
      s.gamma[static_cast<std::size_t>(c) * s.P() + p] = on;
      draw_phi_block(s, c, p, nullptr, priors_.lambda, rng);
    }
  return s;
}

void DpSampler::sweep(ClusterState& s, Rng& rng) const {
  if (s.z.size() != data_->n() || s.P() != data_->P())
    throw ConfigError("sampler state does not match the data");
  update_allocations(s, rng);
  const auto sizes = s.sizes();
  update_sticks(s, sizes, rng);
  update_selection(s, sizes, rng);
  update_alpha(s, rng);
}

void DpSampler::update_allocations(ClusterState& s, Rng& rng) const {
  const std::size_t C = static_cast<std::size_t>(s.clusters);
  const std::size_t L = static_cast<std::size_t>(offsets_.back());
  const std::size_t P = s.P();

  // log phi# per cluster, flattened like a phi block.
  std::vector<double> log_kernel(C * L);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t p = 0; p < P; ++p)
      for (int x = 0; x < s.levels[p]; ++x) {
        const std::size_t k = static_cast<std::size_t>(offsets_[p] + x);
        log_kernel[c * L + k] = s.gamma[c * P + p] ? std::log(s.phi[c * L + k]) : log_pi_[k];
      }
  std::vector<double> log_psi(C);
  for (std::size_t c = 0; c < C; ++c) log_psi[c] = s.psi[c] > 0.0 ? std::log(s.psi[c]) : kNegInf;

  // Cumulative allocation probabilities per distinct pattern.
  std::vector<double> cumulative(patterns_.size() * C);
  std::vector<double> lw(C);
  for (std::size_t u = 0; u < patterns_.size(); ++u) {
    const auto& pat = patterns_[u];
    double best = kNegInf;
    for (std::size_t c = 0; c < C; ++c) {
      double v = log_psi[c];
      const double* row = log_kernel.data() + c * L;
      for (std::size_t p = 0; p < P; ++p) v += row[offsets_[p] + pat[p]];
      lw[c] = v;
      best = std::max(best, v);
    }
    if (!std::isfinite(best)) throw NumericalError("no cluster can hold a covariate pattern");
    double acc = 0.0;
    double* cum = cumulative.data() + u * C;
    for (std::size_t c = 0; c < C; ++c) {
      acc += std::exp(lw[c] - best);
      cum[c] = acc;
    }
  }
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    const double* cum = cumulative.data() + pattern_of_[i] * C;
    const double target = rng.uniform() * cum[C - 1];
    auto it = std::upper_bound(cum, cum + C, target);
    s.z[i] = static_cast<int>(std::min<std::ptrdiff_t>(it - cum, static_cast<std::ptrdiff_t>(C - 1)));
  }
}

void DpSampler::update_sticks(ClusterState& s, const std::vector<std::int64_t>& sizes,
                              Rng& rng) const {
  draw_sticks(s, sizes, rng);
}

void DpSampler::update_selection(ClusterState& s, const std::vector<std::int64_t>& sizes,
                                 Rng& rng) const {
  const std::size_t C = static_cast<std::size_t>(s.clusters);
  const std::size_t L = static_cast<std::size_t>(offsets_.back());
  const std::size_t P = s.P();
  const double lambda = priors_.lambda;

  std::vector<double> counts(C * L, 0.0);
  for (std::size_t i = 0; i < data_->n(); ++i) {
    double* block = counts.data() + static_cast<std::size_t>(s.z[i]) * L;
    const auto row = data_->row(i);
    for (std::size_t p = 0; p < P; ++p) block[offsets_[p] + row[p]] += 1.0;
  }

  // Occupied clusters: gamma with phi integrated out, then phi given gamma.
  for (std::size_t c = 0; c < C; ++c) {
    if (sizes[c] == 0) continue;
    const double nc = static_cast<double>(sizes[c]);
    for (std::size_t p = 0; p < P; ++p) {
      const double* cnt = counts.data() + c * L + offsets_[p];
      const int M = s.levels[p];
      std::uint8_t g = 0;
      if (!options_.fix_gamma_zero && s.w[p]) {
        double log_dm = std::lgamma(M * lambda) - std::lgamma(M * lambda + nc);
        double log_base = 0.0;
        for (int x = 0; x < M; ++x) {
          if (cnt[x] == 0.0) continue;
          log_dm += std::lgamma(lambda + cnt[x]) - std::lgamma(lambda);
          log_base += cnt[x] * log_pi_[static_cast<std::size_t>(offsets_[p] + x)];
        }
        const double rho = s.rho[p];
        double log_odds = std::log(rho) - std::log1p(-rho) + log_dm - log_base;
        if (std::isnan(log_odds)) throw NumericalError("selection odds are not a number");
        const double prob = 1.0 / (1.0 + std::exp(-log_odds));
        g = rng.bernoulli(prob) ? 1 : 0;
      }
      s.gamma[c * P + p] = g;
      draw_phi_block(s, static_cast<int>(c), p, g ? cnt : nullptr, lambda, rng);
    }
  }

  // Atom and rho given the occupied clusters' gammas, empty clusters integrated out.
  double K = 0.0;
  for (std::size_t c = 0; c < C; ++c) K += sizes[c] > 0 ? 1.0 : 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    if (options_.fix_gamma_zero) {
      s.w[p] = 0;
      s.rho[p] = 0.0;
      continue;
    }
    double on = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      if (sizes[c] > 0) on += s.gamma[c * P + p];
    const double a = priors_.rho_a, b = priors_.rho_b;
    const double log_slab = std::log(priors_.atom_weight) + log_beta_fn(a + on, b + K - on) -
                            log_beta_fn(a, b);
    double prob_slab = 1.0;
    if (on == 0.0) {
      const double log_atom = std::log1p(-priors_.atom_weight);
      prob_slab = 1.0 / (1.0 + std::exp(log_atom - log_slab));
    }
    s.w[p] = rng.bernoulli(prob_slab) ? 1 : 0;
    s.rho[p] = s.w[p] ? rng.beta(a + on, b + K - on) : 0.0;
  }

  // Empty clusters from the prior.
  for (std::size_t c = 0; c < C; ++c) {
    if (sizes[c] > 0) continue;
    for (std::size_t p = 0; p < P; ++p) {
      s.gamma[c * P + p] = s.w[p] && rng.bernoulli(s.rho[p]);
      draw_phi_block(s, static_cast<int>(c), p, nullptr, lambda, rng);
    }
  }
}

void DpSampler::update_alpha(ClusterState& s, Rng& rng) const {
  double log_rest = 0.0;
  for (int c = 0; c + 1 < s.clusters; ++c) log_rest += std::log1p(-s.V[static_cast<std::size_t>(c)]);
  const double shape = priors_.alpha_shape + s.clusters - 1;
  const double rate = priors_.alpha_rate - log_rest;
  s.alpha = rng.gamma(shape, rate);
  if (!(s.alpha > 0.0) || !std::isfinite(s.alpha)) throw NumericalError("alpha draw is not finite");
}

void gibbs_sweep(ClusterState& state, const CategoricalDataset& data,
                 const MarginalFrequencies& marginals, const PriorConfig& priors, Rng& rng,
                 const SamplerOptions& options) {
  DpSampler sampler(data, marginals, priors, options);
  sampler.sweep(state, rng);
}

ClusterState draw_from_prior(std::size_t n, std::span<const int> levels, const PriorConfig& priors,
                             Rng& rng) {
  priors.validate();
  const int C = priors.max_clusters;
  ClusterState s = empty_state(n, levels, C);
  s.alpha = rng.gamma(priors.alpha_shape, priors.alpha_rate);
  for (int c = 0; c + 1 < C; ++c) s.V[static_cast<std::size_t>(c)] = rng.beta(1.0, s.alpha);
  s.V[static_cast<std::size_t>(C - 1)] = 1.0;
  sticks_to_weights(s);
  for (auto& zi : s.z) zi = static_cast<int>(rng.categorical(s.psi));
  for (std::size_t p = 0; p < s.P(); ++p) {
    s.w[p] = rng.bernoulli(priors.atom_weight);
    s.rho[p] = s.w[p] ? rng.beta(priors.rho_a, priors.rho_b) : 0.0;
  }
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < s.P(); ++p) {
      s.gamma[static_cast<std::size_t>(c) * s.P() + p] = s.w[p] && rng.bernoulli(s.rho[p]);
      draw_phi_block(s, c, p, nullptr, priors.lambda, rng);
    }
  return s;
}

CategoricalDataset simulate_covariates(const ClusterState& state,
                                       const MarginalFrequencies& marginals, Rng& rng) {
  const std::size_t n = state.z.size(), P = state.P();
  std::vector<int> codes(n * P);
  std::vector<double> probs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < P; ++p) {
      const int c = state.z[i];
      probs.resize(static_cast<std::size_t>(state.levels[p]));
      for (int x = 0; x < state.levels[p]; ++x)
        probs[static_cast<std::size_t>(x)] = state.gamma_at(c, p) ? state.phi_at(c, p, x) : marginals(p, x);
      codes[i * P + p] = static_cast<int>(rng.categorical(probs));
    }
  return CategoricalDataset(n, state.levels, std::move(codes));
}

// ---- chains ----------------------------------------------------------------

std::vector<int> ClusterTrace::phi_offsets() const { return level_offsets(levels); }

namespace {

TraceDraw snapshot(const ClusterState& s, std::size_t sweep, const SamplerOptions& options) {
  TraceDraw d;
  d.sweep = sweep;
  d.alpha = s.alpha;
  d.last_stick = s.psi.back();
  d.rho = s.rho;
  d.w = s.w;
  const auto sizes = s.sizes();
  const std::size_t L = static_cast<std::size_t>(s.offsets.back());
  for (int c = 0; c < s.clusters; ++c) {
    const std::size_t cu = static_cast<std::size_t>(c);
    if (sizes[cu] == 0) continue;
    TraceCluster tc;
    tc.label = c;
    tc.size = sizes[cu];
    tc.psi = s.psi[cu];
    tc.gamma.assign(s.gamma.begin() + static_cast<std::ptrdiff_t>(cu * s.P()),
                    s.gamma.begin() + static_cast<std::ptrdiff_t>((cu + 1) * s.P()));
    if (options.record_phi)
      tc.phi.assign(s.phi.begin() + static_cast<std::ptrdiff_t>(cu * L),
                    s.phi.begin() + static_cast<std::ptrdiff_t>((cu + 1) * L));
    d.clusters.push_back(std::move(tc));
  }
  if (options.record_allocations) d.z = s.z;
  return d;
}

}  // namespace

ClusterTrace run_chain(const CategoricalDataset& data, const PriorConfig& priors,
                       const ChainSettings& settings) {
  if (settings.iterations < 1) throw ConfigError("chain needs at least one retained sweep");
  if (settings.thin < 1) throw ConfigError("thinning interval must be at least 1");
  ClusterTrace trace;
  trace.n = data.n();
  trace.levels.assign(data.levels().begin(), data.levels().end());
  trace.names = data.names();
  trace.marginals = marginals(data);
  trace.seed = settings.seed;
  trace.burnin = settings.burnin;
  trace.thin = settings.thin;

  DpSampler sampler(data, trace.marginals, priors, settings.options);
  Rng rng(settings.seed);
  ClusterState state = sampler.initial_state(rng);
  const std::size_t total = settings.burnin + settings.iterations;
  trace.draws.reserve((settings.iterations + settings.thin - 1) / settings.thin);
  for (std::size_t t = 0; t < total; ++t) {
    sampler.sweep(state, rng);
    if (t < settings.burnin) continue;
    if ((t - settings.burnin) % settings.thin != 0) continue;
    trace.draws.push_back(snapshot(state, t + 1, settings.options));
  }
  state.check_invariants();
  return trace;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<RhoSummary> posterior_rho_summary(const ClusterTrace& trace) {
  if (trace.draws.empty()) throw ConfigError("empty trace");
  std::vector<RhoSummary> out(trace.P());
  std::vector<double> column(trace.size());
  for (std::size_t p = 0; p < trace.P(); ++p) {
    for (std::size_t t = 0; t < trace.size(); ++t) column[t] = trace.draws[t].rho[p];
    out[p].median = empirical_quantile(column, 0.5);
    out[p].lower = empirical_quantile(column, 0.025);
    out[p].upper = empirical_quantile(column, 0.975);
    out[p].mean = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(column.size());
  }
  return out;
}

// ---- trace files -----------------------------------------------------------

void write_trace(const ClusterTrace& trace, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  json meta = {{"n", trace.n},           {"levels", trace.levels},
               {"names", trace.names},   {"marginals", trace.marginals.freq},
               {"seed", trace.seed},     {"burnin", trace.burnin},
               {"thin", trace.thin},     {"draws", trace.size()},
               {"allocations", trace.has_allocations()}};
  out << "# " << meta.dump() << '\n';
  out.precision(17);
  for (const auto& d : trace.draws) {
    out << "R," << d.sweep << ',' << d.alpha << ',' << d.clusters.size() << ',' << d.last_stick;
    for (double r : d.rho) out << ',' << r;
    for (auto w : d.w) out << ',' << int(w);
    out << '\n';
    for (const auto& c : d.clusters) {
      out << "C," << d.sweep << ',' << c.label << ',' << c.size << ',' << c.psi;
      for (auto g : c.gamma) out << ',' << int(g);
      for (double v : c.phi) out << ',' << v;
      out << '\n';
    }
    if (!d.z.empty()) {
      out << "Z," << d.sweep;
      for (int zi : d.z) out << ',' << zi;
      out << '\n';
    }
  }
  if (!out) throw ConfigError("failed writing trace " + path.string());
}

ClusterTrace read_trace(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw ConfigError("trace file lacks its metadata line: " + path.string());
  ClusterTrace trace;
  try {
    const json meta = json::parse(line.substr(2));
    trace.n = meta.at("n").get<std::size_t>();
    trace.levels = meta.at("levels").get<std::vector<int>>();
    trace.names = meta.at("names").get<std::vector<std::string>>();
    trace.marginals.freq = meta.at("marginals").get<std::vector<std::vector<double>>>();
    trace.seed = meta.at("seed").get<std::uint64_t>();
    trace.burnin = meta.at("burnin").get<std::size_t>();
    trace.thin = meta.at("thin").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError("bad trace metadata in " + path.string() + ": " + e.what());
  }
  const std::size_t P = trace.P();
  const int L = level_offsets(trace.levels).back();
  std::size_t line_no = 1;
  auto fail = [&](const std::string& what) {
    throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) fail("bad number '" + s + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + s + "'");
    }
    return 0.0;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < 2) fail("short row");
    const auto sweep = static_cast<std::size_t>(num(f[1]));
    if (f[0] == "R") {
      if (f.size() != 5 + 2 * P) fail("draw row has the wrong width");
      TraceDraw d;
      d.sweep = sweep;
      d.alpha = num(f[2]);
      d.last_stick = num(f[4]);
      for (std::size_t p = 0; p < P; ++p) d.rho.push_back(num(f[5 + p]));
      for (std::size_t p = 0; p < P; ++p) d.w.push_back(static_cast<std::uint8_t>(num(f[5 + P + p])));
      trace.draws.push_back(std::move(d));
    } else if (f[0] == "C") {
      if (trace.draws.empty() || trace.draws.back().sweep != sweep) fail("cluster row without its draw");
      if (f.size() != 5 + P && f.size() != 5 + P + static_cast<std::size_t>(L))
        fail("cluster row has the wrong width");
      TraceCluster c;
      c.label = static_cast<int>(num(f[2]));
      c.size = static_cast<std::int64_t>(num(f[3]));
      c.psi = num(f[4]);
      for (std::size_t p = 0; p < P; ++p) c.gamma.push_back(static_cast<std::uint8_t>(num(f[5 + p])));
      for (std::size_t k = 5 + P; k < f.size(); ++k) c.phi.push_back(num(f[k]));
      trace.draws.back().clusters.push_back(std::move(c));
    } else if (f[0] == "Z") {
      if (trace.draws.empty() || trace.draws.back().sweep != sweep) fail("allocation row without its draw");
      if (f.size() != 2 + trace.n) fail("allocation row has the wrong width");
      auto& z = trace.draws.back().z;
      z.reserve(trace.n);
      for (std::size_t i = 0; i < trace.n; ++i) z.push_back(static_cast<int>(num(f[2 + i])));
    } else {
      fail("unknown row kind '" + f[0] + "'");
    }
  }
  return trace;
}

}  // namespace catgraph
