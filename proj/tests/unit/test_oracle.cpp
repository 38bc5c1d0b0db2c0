#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "catgraph/error.hpp"
#include "catgraph/oracle.hpp"

using namespace catgraph;

TEST_CASE("single cluster joints are product multinomials") {
  const std::vector<std::vector<std::vector<double>>> phi{{{0.2, 0.8}, {0.1, 0.3, 0.6}}};
  const MixtureSpec on({2, 3}, {1.0}, {1, 1}, phi);
  const auto j = joint_distribution(on, {0, 1});
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) CHECK(j[static_cast<std::size_t>(a * 3 + b)] == doctest::Approx(phi[0][0][a] * phi[0][1][b]));

  const MixtureSpec off({2, 3}, {1.0}, {0, 0}, phi, {{0.5, 0.5}, {0.2, 0.2, 0.6}});
  const auto k = joint_distribution(off, {1, 0});
  CHECK(k[2 * 2 + 1] == doctest::Approx(0.6 * 0.5));
  CHECK(off.pi(1, 2) == 0.6);
  CHECK(off.gamma_product(0, 1) == 0);
}

TEST_CASE("two cluster hand computation") {
  // Covariate 1 is selected only by cluster 0, so its marginal is that cluster's profile.
  const MixtureSpec s({2, 2}, {0.4, 0.6}, {1, 1, 1, 0},
                      {{{0.2, 0.8}, {0.7, 0.3}}, {{0.5, 0.5}, {0.9, 0.1}}});
  CHECK(s.pi(0, 0) == doctest::Approx(0.38));
  CHECK(s.pi(1, 0) == doctest::Approx(0.7));
  const auto j = joint_distribution(s, {0, 1});
  CHECK(j[0] == doctest::Approx(0.4 * 0.2 * 0.7 + 0.6 * 0.5 * 0.7));
  CHECK(j[1] == doctest::Approx(0.4 * 0.2 * 0.3 + 0.6 * 0.5 * 0.3));
  CHECK(j[2] == doctest::Approx(0.4 * 0.8 * 0.7 + 0.6 * 0.5 * 0.7));
  CHECK(std::accumulate(j.begin(), j.end(), 0.0) == doctest::Approx(1.0));
  CHECK(s.gamma_product(0, 1) == 1);
}

TEST_CASE("specs are validated") {
  CHECK_THROWS_AS(MixtureSpec({2}, {0.5, 0.4}, {1, 1}, {{{0.5, 0.5}}, {{0.5, 0.5}}}), ConfigError);
  CHECK_THROWS_AS(MixtureSpec({2}, {1.0}, {1}, {{{0.5, 0.6}}}), ConfigError);
}

TEST_CASE("random specs satisfy their hypotheses and consistency") {
  Rng rng(1);
  for (auto h : {Hypothesis::DisjointPair, Hypothesis::IsolatedSet, Hypothesis::NeverSelected, Hypothesis::None}) {
    for (int trial = 0; trial < 100; ++trial) {
      std::size_t p = 0, q = 0;
      const auto s = random_spec(rng, h, p, q);
      CHECK(s.P() >= 2);
      CHECK(s.P() <= 4);
      CHECK(s.C() >= 1);
      CHECK(s.C() <= 5);
      for (std::size_t r = 0; r < s.P(); ++r) {
        // pi is the marginal of the mixture.
        const auto m = joint_distribution(s, {r});
        for (int x = 0; x < s.levels()[r]; ++x) CHECK(m[static_cast<std::size_t>(x)] == doctest::Approx(s.pi(r, x)).epsilon(1e-12));
      }
      if (h == Hypothesis::DisjointPair) CHECK(s.gamma_product(p, q) == 0);
      if (h == Hypothesis::NeverSelected)
        for (std::size_t c = 0; c < s.C(); ++c) CHECK_FALSE(s.gamma(c, p));
      if (h == Hypothesis::IsolatedSet)
        for (std::size_t c = 0; c < s.C(); ++c)
          if (s.gamma(c, p))
            for (std::size_t r = 0; r < s.P(); ++r) CHECK((r == p || !s.gamma(c, r)));
    }
  }
}

// With a single co-selecting cluster the fixed point forces phi = pi, so
// dependence needs at least two.
TEST_CASE("co-selected covariates with distinct profiles are dependent") {
  Rng rng(2);
  int found = 0;
  for (int trial = 0; trial < 200 && found < 20; ++trial) {
    std::size_t p = 0, q = 0;
    const auto s = random_spec(rng, Hypothesis::None, p, q);
    if (s.C() < 2) continue;
    for (std::size_t a = 0; a < s.P(); ++a)
      for (std::size_t b = a + 1; b < s.P(); ++b)
        if (s.gamma_product(a, b) >= 2) {
          CHECK(dependence_gap(s, a, b) > 1e-6);
          ++found;
        }
  }
  CHECK(found > 0);
}

TEST_CASE("property checks on fresh seeds") {
  const auto pair = check_pairwise(200, 11);
  CHECK(pair.trials == 200);
  CHECK(pair.max_gap < 1e-10);
  CHECK(pair.max_identity < 1e-12);
  CHECK(check_set(200, 12).max_gap < 1e-10);
  CHECK(check_corollary(200, 13).max_gap < 1e-10);
}

TEST_CASE("converse witnesses") {
  const auto parity = parity_witness();
  CHECK(parity.P() == 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) CHECK(dependence_gap(parity, a, b) < 1e-12);
  CHECK(set_independence_gap(parity, 0) > 0.01);

  const auto flat = flat_profile_witness();
  CHECK(dependence_gap(flat, 0, 1) == 0.0);
  CHECK(set_independence_gap(flat, 0) == 0.0);
  CHECK(flat.gamma_product(0, 1) != 0);
}

TEST_CASE("joint size guard") {
  const std::vector<int> levels(7, 8);
  std::vector<std::vector<double>> profile(7, std::vector<double>(8, 0.125));
  const MixtureSpec big(levels, {1.0}, std::vector<std::uint8_t>(7, 1), {profile});
  CHECK_THROWS_AS(joint_distribution(big, {0, 1, 2, 3, 4, 5, 6}), ConfigError);
  CHECK_NOTHROW(joint_distribution(big, {0, 1, 2, 3, 4, 5}));
}

TEST_CASE("graph enumeration") {
  CHECK(all_graphs(2).size() == 2);
  const auto g4 = all_graphs(4);
  CHECK(g4.size() == 64);
  std::set<std::vector<std::uint64_t>> keys;
  for (const auto& g : g4) keys.insert(g.key());
  CHECK(keys.size() == 64);
  CHECK(all_graphs(5).size() == 1024);
  CHECK_THROWS_AS(all_graphs(6), ConfigError);
}

TEST_CASE("two-covariate model posteriors") {
  ContingencyTable assoc;
  assoc.levels = {2, 2};
  assoc.counts = {3333, 1667, 1667, 3333};
  assoc.total = 10000;
  const auto a = exhaustive_model_posterior(assoc);
  CHECK(a.probability_of(parse_model("AB", 2)) > 0.95);
  CHECK(a.probability[0] + a.probability[1] == doctest::Approx(1.0));

  ContingencyTable indep = assoc;
  indep.counts = {2500, 2500, 2500, 2500};
  const auto b = exhaustive_model_posterior(indep);
  CHECK(b.graphs[b.best()] == Graph(2));
  CHECK(b.warnings.empty());
}
