#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "catgraph/dpcluster.hpp"
#include "catgraph/error.hpp"
#include "stats.hpp"
#include "temp_dir.hpp"

using namespace catgraph;

namespace {

MarginalFrequencies fixed_marginals(std::vector<std::vector<double>> freq) {
  MarginalFrequencies m;
  m.freq = std::move(freq);
  return m;
}

// Relabel allocations by order of first appearance.
std::vector<int> canonical(const std::vector<int>& z) {
  std::map<int, int> seen;
  std::vector<int> out;
  for (int c : z) {
    auto it = seen.find(c);
    if (it == seen.end()) it = seen.emplace(c, static_cast<int>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

// All set partitions of n items as restricted growth strings.
void partitions(std::size_t n, std::vector<int>& cur, int blocks, std::vector<std::vector<int>>& out) {
  if (cur.size() == n) {
    out.push_back(cur);
    return;
  }
  for (int b = 0; b <= blocks; ++b) {
    cur.push_back(b);
    partitions(n, cur, std::max(blocks, b + 1), out);
    cur.pop_back();
  }
}

// Exact posterior over partitions of n subjects whose covariates all take
// level 0 and whose fixed marginals put all mass on level 0. Each of the
// covariates contributes (1 - a) + a * E_rho prod_c [rho m(n_c) + 1 - rho],
// with m(k) the Beta(lambda, lambda) moment E[phi^k]; the partition prior is
// the Dirichlet process EPPF integrated over the Gamma hyperprior on alpha.
std::vector<double> exact_partition_posterior(const std::vector<std::vector<int>>& parts,
                                              std::size_t P, const PriorConfig& pr) {
  std::vector<double> post;
  for (const auto& part : parts) {
    const int K = *std::max_element(part.begin(), part.end()) + 1;
    std::vector<int> sizes(static_cast<std::size_t>(K), 0);
    for (int c : part) ++sizes[static_cast<std::size_t>(c)];
    const double n = static_cast<double>(part.size());

    const auto integrand = [&](double a) {
      const double log_v = K * std::log(a) + std::lgamma(a) - std::lgamma(a + n) +
                           (pr.alpha_shape - 1.0) * std::log(a) - pr.alpha_rate * a;
      return std::exp(log_v);
    };
    boost::math::quadrature::exp_sinh<double> integrator;
    double prior = integrator.integrate(integrand);
    for (int s : sizes) prior *= std::tgamma(s);

    // Coefficients of prod_c (1 + rho (m_c - 1)) as a polynomial in rho.
    std::vector<double> poly{1.0};
    for (int s : sizes) {
      const double m = boost::math::beta(pr.lambda + s, pr.lambda) / boost::math::beta(pr.lambda, pr.lambda);
      std::vector<double> next(poly.size() + 1, 0.0);
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k] += poly[k];
        next[k + 1] += poly[k] * (m - 1.0);
      }
      poly = next;
    }
    double slab = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k)
      slab += poly[k] * boost::math::beta(pr.rho_a + static_cast<double>(k), pr.rho_b) /
              boost::math::beta(pr.rho_a, pr.rho_b);
    const double per_covariate = (1.0 - pr.atom_weight) + pr.atom_weight * slab;
    post.push_back(prior * std::pow(per_covariate, static_cast<double>(P)));
  }
  const double total = std::accumulate(post.begin(), post.end(), 0.0);
  for (double& v : post) v /= total;
  return post;
}

}  // namespace

TEST_CASE("likelihood contribution examples") {
  PriorConfig pr;
  pr.max_clusters = 2;
  Rng rng(1);
  const std::vector<int> levels{2, 3};
  auto s = draw_from_prior(1, levels, pr, rng);
  const CategoricalDataset data(1, levels, {1, 2});
  const auto pi = fixed_marginals({{0.5, 0.5}, {0.1, 0.3, 0.6}});
  const std::vector<double> phi{0.2, 0.8, 0.25, 0.25, 0.5};
  std::copy(phi.begin(), phi.end(), s.phi.begin());

  s.gamma[0] = 0;
  s.gamma[1] = 0;
  CHECK(likelihood_contribution(s, data, pi, 0, 0) == doctest::Approx(0.5 * 0.6));
  s.gamma[0] = 1;
  s.gamma[1] = 1;
  CHECK(likelihood_contribution(s, data, pi, 0, 0) == doctest::Approx(0.8 * 0.5));
  s.gamma[1] = 0;
  CHECK(likelihood_contribution(s, data, pi, 0, 0) == doctest::Approx(0.8 * 0.6));
  s.gamma[0] = 0;
  s.gamma[1] = 1;
  CHECK(likelihood_contribution(s, data, pi, 0, 0) == doctest::Approx(0.5 * 0.5));
}

TEST_CASE("prior hyperparameters are validated") {
  PriorConfig pr;
  pr.lambda = 0.0;
  CHECK_THROWS_AS(pr.validate(), ConfigError);
  pr = {};
  pr.atom_weight = 1.5;
  CHECK_THROWS_AS(pr.validate(), ConfigError);
  pr = {};
  pr.max_clusters = 1;
  CHECK_THROWS_AS(pr.validate(), ConfigError);
  CHECK_NOTHROW(PriorConfig{}.validate());
}

TEST_CASE("state invariants hold after every sweep") {
  Rng gen(2);
  const std::vector<int> levels{2, 3, 2, 4};
  std::vector<int> codes;
  for (int i = 0; i < 60; ++i)
    for (int m : levels) codes.push_back(static_cast<int>(gen.uniform() * m));
  const CategoricalDataset data(60, levels, codes);
  const DpSampler sampler(data, marginals(data), PriorConfig{});
  Rng rng(3);
  auto s = sampler.initial_state(rng);
  CHECK(s.occupied() <= 10);
  s.check_invariants();
  for (int t = 0; t < 300; ++t) {
    sampler.sweep(s, rng);
    REQUIRE_NOTHROW(s.check_invariants());
    for (std::size_t c = 0; c < s.psi.size(); ++c) {
      double partial = 0.0;
      for (std::size_t l = 0; l <= c; ++l) partial += s.psi[l];
      CHECK(partial <= 1.0 + 1e-12);
    }
    const auto sz = s.sizes();
    CHECK(std::accumulate(sz.begin(), sz.end(), std::int64_t{0}) == 60);
  }
}

TEST_CASE("chains are deterministic in the seed and thin as documented") {
  Rng gen(4);
  std::vector<int> codes;
  for (int i = 0; i < 40; ++i) codes.insert(codes.end(), {i % 2, i % 3 == 0, i % 5 == 0});
  const CategoricalDataset data(40, {2, 2, 2}, codes);
  ChainSettings cs;
  cs.burnin = 0;
  cs.iterations = 1;
  CHECK(run_chain(data, PriorConfig{}, cs).size() == 1);

  cs.burnin = 5;
  cs.iterations = 10;
  cs.thin = 3;
  cs.seed = 9;
  const auto a = run_chain(data, PriorConfig{}, cs);
  const auto b = run_chain(data, PriorConfig{}, cs);
  REQUIRE(a.size() == 4);
  CHECK(a.draws[0].sweep == 6);
  CHECK(a.draws[3].sweep == 15);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a.draws[t].rho == b.draws[t].rho);
    CHECK(a.draws[t].z == b.draws[t].z);
    CHECK(a.draws[t].alpha == b.draws[t].alpha);
    std::int64_t total = 0;
    for (const auto& c : a.draws[t].clusters) total += c.size;
    CHECK(total == 40);
  }
  cs.seed = 10;
  const auto c = run_chain(data, PriorConfig{}, cs);
  bool differs = false;
  for (std::size_t t = 0; t < a.size(); ++t) differs |= a.draws[t].alpha != c.draws[t].alpha;
  CHECK(differs);

  cs.iterations = 0;
  CHECK_THROWS_AS(run_chain(data, PriorConfig{}, cs), ConfigError);
}

TEST_CASE("identical subjects: sampler matches the exact partition posterior") {
  const std::size_t n = 4, P = 2;
  const CategoricalDataset data(n, {2, 2}, std::vector<int>(n * P, 0));
  const auto pi = fixed_marginals({{1.0, 0.0}, {1.0, 0.0}});
  const PriorConfig pr;

  std::vector<std::vector<int>> parts;
  std::vector<int> cur;
  partitions(n, cur, 0, parts);
  REQUIRE(parts.size() == 15);
  const auto exact = exact_partition_posterior(parts, P, pr);

  // The single-cluster partition is the modal state.
  const std::size_t modal = static_cast<std::size_t>(std::max_element(exact.begin(), exact.end()) - exact.begin());
  CHECK(parts[modal] == std::vector<int>{0, 0, 0, 0});

  const DpSampler sampler(data, pi, pr);
  Rng rng(5);
  auto s = sampler.initial_state(rng);
  for (int t = 0; t < 500; ++t) sampler.sweep(s, rng);
  std::vector<double> freq(parts.size(), 0.0);
  const int sweeps = 60000;
  for (int t = 0; t < sweeps; ++t) {
    sampler.sweep(s, rng);
    const auto key = canonical(s.z);
    const auto it = std::find(parts.begin(), parts.end(), key);
    REQUIRE(it != parts.end());
    freq[static_cast<std::size_t>(it - parts.begin())] += 1.0 / sweeps;
  }
  const std::size_t sampled_mode = static_cast<std::size_t>(std::max_element(freq.begin(), freq.end()) - freq.begin());
  CHECK(sampled_mode == modal);
  CHECK(testing::total_variation(freq, exact) < 0.03);
}

TEST_CASE("perfectly separated patterns use at least two clusters") {
  const std::size_t n = 100, P = 4;
  std::vector<int> codes;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < P; ++p) codes.push_back(i < n / 2 ? 0 : 1);
  const CategoricalDataset data(n, std::vector<int>(P, 2), codes);
  ChainSettings cs;
  cs.burnin = 200;
  cs.iterations = 1000;
  cs.seed = 6;
  const auto trace = run_chain(data, PriorConfig{}, cs);
  std::size_t multi = 0;
  for (const auto& d : trace.draws) multi += d.clusters.size() >= 2;
  CHECK(static_cast<double>(multi) / static_cast<double>(trace.size()) >= 0.95);
}

TEST_CASE("rho summaries") {
  ClusterTrace t;
  t.levels = {2, 2};
  for (double r : {0.2, 0.6, 0.4}) {
    TraceDraw d;
    d.rho = {r, 0.0};
    d.w = {1, 0};
    t.draws.push_back(d);
  }
  const auto s = posterior_rho_summary(t);
  CHECK(s[0].median == doctest::Approx(0.4));
  CHECK(s[0].mean == doctest::Approx(0.4));
  CHECK(s[0].lower == doctest::Approx(0.21));
  CHECK(s[0].upper == doctest::Approx(0.59));
  CHECK(s[1].median == 0.0);
  CHECK(s[1].upper == 0.0);
  CHECK(empirical_quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK_THROWS_AS(posterior_rho_summary(ClusterTrace{}), ConfigError);
}

TEST_CASE("trace files round trip") {
  testing::TempDir dir;
  Rng gen(7);
  std::vector<int> codes;
  for (int i = 0; i < 30; ++i) codes.insert(codes.end(), {i % 2, i % 3, i % 2 == 0 && i % 3 == 0});
  const CategoricalDataset data(30, {2, 3, 2}, codes, {"smoke", "age", "bp"});
  ChainSettings cs;
  cs.burnin = 3;
  cs.iterations = 8;
  cs.thin = 2;
  cs.seed = 12;
  const auto trace = run_chain(data, PriorConfig{}, cs);
  write_trace(trace, dir / "trace.csv");
  const auto back = read_trace(dir / "trace.csv");
  CHECK(back.n == trace.n);
  CHECK(back.levels == trace.levels);
  CHECK(back.names == trace.names);
  CHECK(back.seed == 12);
  CHECK(back.burnin == 3);
  CHECK(back.thin == 2);
  CHECK(back.marginals.freq == trace.marginals.freq);
  REQUIRE(back.size() == trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& a = trace.draws[t];
    const auto& b = back.draws[t];
    CHECK(b.sweep == a.sweep);
    CHECK(b.alpha == a.alpha);
    CHECK(b.last_stick == a.last_stick);
    CHECK(b.rho == a.rho);
    CHECK(b.w == a.w);
    CHECK(b.z == a.z);
    REQUIRE(b.clusters.size() == a.clusters.size());
    for (std::size_t k = 0; k < a.clusters.size(); ++k) {
      CHECK(b.clusters[k].label == a.clusters[k].label);
      CHECK(b.clusters[k].size == a.clusters[k].size);
      CHECK(b.clusters[k].psi == a.clusters[k].psi);
      CHECK(b.clusters[k].gamma == a.clusters[k].gamma);
      CHECK(b.clusters[k].phi == a.clusters[k].phi);
    }
  }

  cs.options.record_allocations = false;
  cs.options.record_phi = false;
  const auto lean = run_chain(data, PriorConfig{}, cs);
  write_trace(lean, dir / "lean.csv");
  const auto lean_back = read_trace(dir / "lean.csv");
  CHECK_FALSE(lean_back.has_allocations());
  CHECK(lean_back.draws[0].clusters[0].phi.empty());

  {
    std::ofstream f(dir / "bad.csv");
    f << "not a trace\n";
  }
  CHECK_THROWS_AS(read_trace(dir / "bad.csv"), ConfigError);
}
