#include <doctest.h>

#include <fstream>
#include <numeric>

#include "catgraph/dataset.hpp"
#include "catgraph/error.hpp"
#include "catgraph/rng.hpp"
#include "temp_dir.hpp"

using namespace catgraph;

namespace {

CategoricalDataset random_dataset(std::size_t n, std::vector<int> levels, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> codes;
  for (std::size_t i = 0; i < n; ++i)
    for (int m : levels) codes.push_back(static_cast<int>(rng.uniform() * m));
  return CategoricalDataset(n, std::move(levels), std::move(codes));
}

}  // namespace

TEST_CASE("dataset invariants are enforced at construction") {
  CHECK_THROWS_AS(CategoricalDataset(0, {2, 2}, {}), ConfigError);
  CHECK_THROWS_AS(CategoricalDataset(1, {2}, {0}), ConfigError);
  CHECK_THROWS_AS(CategoricalDataset(1, {2, 1}, {0, 0}), ConfigError);
  CHECK_THROWS_AS(CategoricalDataset(1, {2, 2}, {0, 2}), ConfigError);
  CHECK_THROWS_AS(CategoricalDataset(1, {2, 2}, {0, 0}, {"A"}), ConfigError);
  CHECK_NOTHROW(CategoricalDataset(1, {2, 2}, {1, 1}, {"A", "B"}));
}

TEST_CASE("default names are letters up to 26 covariates") {
  CHECK(default_covariate_name(0, 6) == "A");
  CHECK(default_covariate_name(25, 26) == "Z");
  CHECK(default_covariate_name(0, 27) == "x1");
  CHECK(default_covariate_name(99, 100) == "x100");
}

TEST_CASE("all mass in one cell") {
  const CategoricalDataset d(2, {2, 2}, {0, 0, 0, 0});
  const auto t = build_table(d);
  CHECK(t.counts == std::vector<std::int64_t>{2, 0, 0, 0});
  CHECK(t.total == 2);
}

TEST_CASE("cells are indexed with the last covariate fastest") {
  const CategoricalDataset d(3, {2, 3}, {0, 1, 1, 0, 1, 2});
  const auto t = build_table(d);
  CHECK(t.size() == 6);
  CHECK(t.counts == std::vector<std::int64_t>{0, 1, 0, 1, 0, 1});
  CHECK(t.index(std::vector<int>{1, 2}) == 5);
  CHECK(t.cell(4) == std::vector<int>{1, 1});
}

TEST_CASE("table margins reproduce n times the marginal frequencies") {
  const auto d = random_dataset(997, {2, 3, 4, 2}, 1);
  const auto t = build_table(d);
  const auto pi = marginals(d);
  CHECK(t.total == 997);
  for (std::size_t p = 0; p < d.P(); ++p) {
    const auto m = t.margin(p);
    double s = 0.0;
    for (std::size_t x = 0; x < m.size(); ++x) {
      std::int64_t direct = 0;
      for (std::size_t i = 0; i < d.n(); ++i) direct += d.code(i, p) == static_cast<int>(x);
      CHECK(m[x] == direct);
      CHECK(static_cast<double>(m[x]) == doctest::Approx(997.0 * pi(p, static_cast<int>(x))).epsilon(1e-12));
      s += pi(p, static_cast<int>(x));
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("marginal frequency examples") {
  std::vector<int> codes;
  for (int i = 0; i < 100; ++i) codes.insert(codes.end(), {0, i % 2});
  const CategoricalDataset d(100, {2, 2}, codes);
  const auto pi = marginals(d);
  CHECK(pi.freq[0] == std::vector<double>{1.0, 0.0});
  CHECK(pi.freq[1] == std::vector<double>{0.5, 0.5});
}

TEST_CASE("table size guard") {
  const std::vector<int> big(27, 2);
  CHECK_THROWS_AS(cell_count(big), ConfigError);
  const std::vector<int> ok(26, 2);
  CHECK(cell_count(ok) == (std::size_t{1} << 26));
}

TEST_CASE("select keeps the chosen columns in order") {
  const auto d = random_dataset(50, {2, 3, 4}, 2);
  const std::vector<std::size_t> keep{2, 0};
  const auto s = d.select(keep);
  CHECK(s.P() == 2);
  CHECK(s.levels(0) == 4);
  for (std::size_t i = 0; i < d.n(); ++i) {
    CHECK(s.code(i, 0) == d.code(i, 2));
    CHECK(s.code(i, 1) == d.code(i, 0));
  }
}

TEST_CASE("expanding a table and tabulating again is the identity") {
  const auto d = random_dataset(300, {3, 2, 2}, 3);
  const auto t = build_table(d);
  const auto e = expand_table(t);
  CHECK(e.n() == 300);
  CHECK(build_table(e).counts == t.counts);
}

TEST_CASE("dataset CSV round trip with integer codes") {
  testing::TempDir dir;
  const auto d = random_dataset(120, {2, 5, 3}, 4);
  write_dataset_csv(d, dir / "d.csv");
  CHECK(std::filesystem::exists(metadata_path(dir / "d.csv")));
  const auto back = read_dataset_csv(dir / "d.csv").data;
  CHECK(back.n() == d.n());
  CHECK(std::vector<int>(back.levels().begin(), back.levels().end()) ==
        std::vector<int>(d.levels().begin(), d.levels().end()));
  CHECK(std::vector<int>(back.codes().begin(), back.codes().end()) ==
        std::vector<int>(d.codes().begin(), d.codes().end()));
}

TEST_CASE("string labels are coded in first-seen order and recorded") {
  testing::TempDir dir;
  {
    std::ofstream f(dir / "s.csv");
    f << "smoking,pressure\nyes,high\nno,low\nyes,low\n";
  }
  const auto loaded = read_dataset_csv(dir / "s.csv");
  CHECK(loaded.data.code(0, 0) == 0);
  CHECK(loaded.data.code(1, 0) == 1);
  CHECK(loaded.data.code(1, 1) == 1);
  CHECK(loaded.level_maps.labels[0] == std::vector<std::string>{"yes", "no"});
  CHECK(loaded.data.name(1) == "pressure");

  write_dataset_csv(loaded.data, dir / "t.csv", &loaded.level_maps);
  const auto again = read_dataset_csv(dir / "t.csv");
  CHECK(std::vector<int>(again.data.codes().begin(), again.data.codes().end()) ==
        std::vector<int>(loaded.data.codes().begin(), loaded.data.codes().end()));
  CHECK(again.level_maps.labels == loaded.level_maps.labels);
}

TEST_CASE("malformed files are configuration errors") {
  testing::TempDir dir;
  CHECK_THROWS_AS(read_dataset_csv(dir / "missing.csv"), ConfigError);
  {
    std::ofstream f(dir / "ragged.csv");
    f << "A,B\n0,1\n1\n";
  }
  CHECK_THROWS_AS(read_dataset_csv(dir / "ragged.csv"), ConfigError);
  {
    std::ofstream f(dir / "constant.csv");
    f << "A,B\n0,1\n0,0\n";
  }
  // A covariate with a single observed level has fewer than two levels.
  CHECK_THROWS_AS(read_dataset_csv(dir / "constant.csv"), ConfigError);
}

TEST_CASE("table CSV round trip") {
  testing::TempDir dir;
  const auto d = random_dataset(500, {2, 3, 2}, 6);
  auto t = build_table(d);
  t.names = {"A", "B", "C"};
  write_table_csv(t, dir / "t.csv");
  const auto back = read_table_csv(dir / "t.csv");
  CHECK(back.levels == t.levels);
  CHECK(back.counts == t.counts);
  CHECK(back.total == 500);
  CHECK(back.names == t.names);
}
