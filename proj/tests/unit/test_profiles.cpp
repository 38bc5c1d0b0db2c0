#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "catgraph/error.hpp"
#include "catgraph/profiles.hpp"
#include "catgraph/rng.hpp"
#include "temp_dir.hpp"

using namespace catgraph;

namespace {

// Trace over binary covariates from allocation vectors alone; every cluster
// has gamma = 0 and uniform phi.
ClusterTrace trace_from_z(std::size_t P, const std::vector<std::vector<int>>& zs) {
  ClusterTrace t;
  t.n = zs.front().size();
  t.levels.assign(P, 2);
  t.marginals.freq.assign(P, {0.5, 0.5});
  for (const auto& z : zs) {
    TraceDraw d;
    d.z = z;
    d.rho.assign(P, 0.0);
    d.w.assign(P, 0);
    std::vector<int> labels = z;
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (int c : labels) {
      TraceCluster tc;
      tc.label = c;
      tc.size = std::count(z.begin(), z.end(), c);
      tc.gamma.assign(P, 0);
      tc.phi.assign(2 * P, 0.5);
      d.clusters.push_back(tc);
    }
    t.draws.push_back(d);
  }
  return t;
}

double brute_score(const std::vector<int>& z, const std::vector<double>& sim) {
  const std::size_t n = z.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = (z[i] == z[j] ? 1.0 : 0.0) - sim[i * n + j];
      s += d * d;
    }
  return s;
}

std::vector<int> random_z(std::size_t n, int k, Rng& rng) {
  std::vector<int> z(n);
  for (auto& v : z) v = static_cast<int>(rng.uniform() * k);
  return z;
}

}  // namespace

TEST_CASE("similarity matrix examples") {
  const auto s = similarity_matrix(trace_from_z(2, {{1, 1, 2}}));
  CHECK(s == std::vector<double>{1, 1, 0, 1, 1, 0, 0, 0, 1});

  const auto t = similarity_matrix(trace_from_z(2, {{0, 0, 1}, {0, 1, 1}, {3, 3, 3}, {0, 1, 2}}));
  CHECK(t[0 * 3 + 1] == doctest::Approx(0.5));
  CHECK(t[1 * 3 + 2] == doctest::Approx(0.5));
  CHECK(t[0 * 3 + 2] == doctest::Approx(0.25));
  CHECK(t[2 * 3 + 0] == t[0 * 3 + 2]);
  for (std::size_t i = 0; i < 3; ++i) CHECK(t[i * 3 + i] == 1.0);
}

TEST_CASE("similarity is invariant to relabelling clusters within a draw") {
  Rng rng(1);
  std::vector<std::vector<int>> zs, relabelled;
  for (int t = 0; t < 20; ++t) {
    auto z = random_z(12, 4, rng);
    zs.push_back(z);
    for (auto& v : z) v = 7 - 2 * v;
    relabelled.push_back(z);
  }
  CHECK(similarity_matrix(trace_from_z(2, zs)) == similarity_matrix(trace_from_z(2, relabelled)));
}

TEST_CASE("identical draws give that partition with score zero") {
  const auto rep = representative_partition(trace_from_z(2, {{4, 4, 9, 4, 9}, {4, 4, 9, 4, 9}}));
  CHECK(rep.labels == std::vector<int>{1, 1, 2, 1, 2});
  CHECK(rep.sizes == std::vector<std::int64_t>{3, 2});
  CHECK(rep.score == doctest::Approx(0.0));
  CHECK(rep.draw == 0);
}

TEST_CASE("two competing partitions are scored exhaustively") {
  {
    const std::vector<std::vector<int>> zs{{0, 0, 1}, {0, 1, 1}};
    const auto t = trace_from_z(2, zs);
    const auto sim = similarity_matrix(t);
    const auto rep = representative_partition(t);
    CHECK(brute_score(zs[0], sim) == doctest::Approx(brute_score(zs[1], sim)));
    CHECK(rep.draw == 0);
    CHECK(rep.score == doctest::Approx(brute_score(zs[0], sim)));
  }
  {
    const std::vector<std::vector<int>> zs{{0, 1, 1}, {0, 0, 1}, {0, 0, 1}};
    const auto t = trace_from_z(2, zs);
    const auto sim = similarity_matrix(t);
    const auto rep = representative_partition(t);
    CHECK(brute_score(zs[1], sim) == doctest::Approx(4.0 / 9.0));
    CHECK(brute_score(zs[0], sim) == doctest::Approx(16.0 / 9.0));
    CHECK(rep.draw == 1);
    CHECK(rep.labels == std::vector<int>{1, 1, 2});
    CHECK(rep.score == doctest::Approx(4.0 / 9.0));
  }
}

TEST_CASE("representative partition agrees with brute-force scoring") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<int>> zs;
    for (int t = 0; t < 15; ++t) zs.push_back(random_z(10, 1 + trial % 4, rng));
    const auto trace = trace_from_z(2, zs);
    const auto sim = similarity_matrix(trace);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t t = 0; t < zs.size(); ++t) {
      const double s = brute_score(zs[t], sim);
      if (s < best - 1e-9) {
        best = s;
        arg = t;
      }
    }
    const auto rep = representative_partition(trace);
    CHECK(rep.draw == arg);
    CHECK(rep.score == doctest::Approx(best));
    CHECK(std::accumulate(rep.sizes.begin(), rep.sizes.end(), std::int64_t{0}) == 10);
    CHECK(*std::max_element(rep.labels.begin(), rep.labels.end()) == rep.clusters());
    CHECK(std::is_sorted(rep.sizes.rbegin(), rep.sizes.rend()));
  }
}

TEST_CASE("long traces are thinned before scoring") {
  Rng rng(3);
  std::vector<std::vector<int>> zs;
  for (int t = 0; t < 40; ++t) zs.push_back(random_z(8, 3, rng));
  const auto rep = representative_partition(trace_from_z(2, zs), RepresentativeOptions{10});
  CHECK(rep.draw % 4 == 0);
}

TEST_CASE("profile symbols follow the credible interval") {
  auto t = trace_from_z(2, {{0, 0, 0, 1}, {0, 0, 0, 1}, {0, 0, 0, 1}});
  // Cluster 0 selects covariate 0 with phi = pi + (-0.2, +0.2); covariate 1 is never selected.
  for (auto& d : t.draws) {
    d.clusters[0].gamma = {1, 0};
    d.clusters[0].phi = {0.3, 0.7, 0.9, 0.1};
  }
  const auto rep = representative_partition(t);
  const auto table = profile_table(t, rep);
  REQUIRE(table.clusters.size() == 2);
  const auto& big = table.clusters[0];
  CHECK(big.size == 3);
  CHECK(big.samples == 3);
  CHECK(big.cells[0][0].symbol == ProfileSymbol::Below);
  CHECK(big.cells[0][1].symbol == ProfileSymbol::Above);
  CHECK(big.cells[0][1].lower == doctest::Approx(0.2));
  CHECK(big.cells[0][1].mean == doctest::Approx(0.2));
  CHECK(big.cells[1][0].symbol == ProfileSymbol::Neutral);
  CHECK(big.cells[1][1].symbol == ProfileSymbol::Neutral);
  for (const auto& row : table.clusters[1].cells)
    for (const auto& cell : row) CHECK(cell.symbol == ProfileSymbol::Neutral);
  CHECK(table.warnings.empty());
  CHECK(symbol_char(ProfileSymbol::Below) == '<');
  CHECK(symbol_char(ProfileSymbol::Neutral) == '0');
  CHECK(symbol_char(ProfileSymbol::Above) == '>');

  const auto text = format_profile_table(table);
  CHECK(text.find("<>") != std::string::npos);
}

TEST_CASE("an interval straddling zero is neutral") {
  auto t = trace_from_z(2, {{0, 0}, {0, 0}, {0, 0}, {0, 0}});
  const double shifts[] = {0.1, -0.1, 0.2, 0.05};
  for (std::size_t k = 0; k < 4; ++k) {
    t.draws[k].clusters[0].gamma = {1, 0};
    t.draws[k].clusters[0].phi = {0.5 - shifts[k], 0.5 + shifts[k], 0.5, 0.5};
  }
  const auto table = profile_table(t, representative_partition(t));
  CHECK(table.clusters[0].cells[0][1].symbol == ProfileSymbol::Neutral);
  CHECK(table.clusters[0].cells[0][1].lower < 0.0);
  CHECK(table.clusters[0].cells[0][1].upper > 0.0);
}

TEST_CASE("clusters with fewer than two aligned draws are neutral with a warning") {
  auto t = trace_from_z(2, {{0, 0, 1}});
  t.draws[0].clusters[0].gamma = {1, 1};
  t.draws[0].clusters[0].phi = {0.0, 1.0, 0.0, 1.0};
  const auto table = profile_table(t, representative_partition(t));
  CHECK_FALSE(table.warnings.empty());
  for (const auto& c : table.clusters)
    for (const auto& row : c.cells)
      for (const auto& cell : row) CHECK(cell.symbol == ProfileSymbol::Neutral);
}

TEST_CASE("profile symbols are invariant to subject order") {
  Rng rng(4);
  std::vector<std::vector<int>> zs;
  for (int t = 0; t < 30; ++t) {
    std::vector<int> z(20);
    for (std::size_t i = 0; i < 20; ++i) z[i] = i < 12 ? 0 : (rng.uniform() < 0.9 ? 1 : 0);
    zs.push_back(z);
  }
  auto t = trace_from_z(2, zs);
  for (auto& d : t.draws)
    for (auto& c : d.clusters) {
      const double shift = c.label == 0 ? 0.3 : -0.3;
      c.gamma = {1, 0};
      c.phi = {0.5 - shift + 0.01 * rng.normal(), 0.0, 0.5, 0.5};
      c.phi[1] = 1.0 - c.phi[0];
    }
  const auto base = profile_table(t, representative_partition(t));

  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  auto shuffled = t;
  for (auto& d : shuffled.draws) {
    std::vector<int> z(20);
    for (std::size_t i = 0; i < 20; ++i) z[i] = d.z[perm[i]];
    d.z = z;
  }
  const auto moved = profile_table(shuffled, representative_partition(shuffled));
  REQUIRE(moved.clusters.size() == base.clusters.size());
  for (std::size_t k = 0; k < base.clusters.size(); ++k)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t x = 0; x < 2; ++x)
        CHECK(moved.clusters[k].cells[p][x].symbol == base.clusters[k].cells[p][x].symbol);
}

TEST_CASE("profile CSV") {
  testing::TempDir dir;
  auto t = trace_from_z(2, {{0, 0, 1}, {0, 0, 1}});
  const auto table = profile_table(t, representative_partition(t));
  write_profile_csv(table, dir / "p.csv");
  std::ifstream in(dir / "p.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "cluster,size,covariate,level,symbol,lower,upper,mean");
  int rows = 0;
  for (std::string line; std::getline(in, line);) rows += !line.empty();
  CHECK(rows == 2 * 2 * 2);
}
