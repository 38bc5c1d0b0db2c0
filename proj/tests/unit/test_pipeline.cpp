#include <doctest.h>

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "catgraph/error.hpp"
#include "catgraph/pipeline.hpp"
#include "temp_dir.hpp"

using namespace catgraph;
using json = nlohmann::json;

namespace {

std::filesystem::path data_file(const std::string& name) {
  return std::filesystem::path(CATGRAPH_TEST_DATA_DIR) / name;
}

PipelineConfig small_config(const std::filesystem::path& out) {
  auto c = read_pipeline_config(data_file("pipeline_small.json"));
  c.output_dir = out;
  return c;
}

std::map<std::string, std::string> manifest_hashes(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  const auto j = json::parse(in);
  std::map<std::string, std::string> out;
  for (const auto& f : j.at("files")) out[f.at("path").get<std::string>()] = f.at("sha256").get<std::string>();
  return out;
}

}  // namespace

TEST_CASE("sha256 of known content") {
  testing::TempDir dir;
  {
    std::ofstream f(dir / "abc.txt", std::ios::binary);
    f << "abc";
  }
  CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  {
    std::ofstream f(dir / "empty.txt", std::ios::binary);
  }
  CHECK(sha256_file(dir / "empty.txt") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK_THROWS_AS(sha256_file(dir / "missing.txt"), ConfigError);
}

TEST_CASE("config parsing keeps defaults and rejects unknown keys") {
  const auto c = parse_pipeline_config(R"({"data": {"preset": "tri3"}})");
  CHECK(c.data.kind == DataSource::Kind::Preset);
  CHECK(c.data.value == "tri3");
  CHECK(c.seed == 1);
  CHECK(c.rho_threshold == 0.01);
  CHECK(c.cluster.burnin == 1000);
  CHECK(c.search.search.strategy == Strategy::Uniform);

  CHECK_THROWS_AS(parse_pipeline_config(R"({"data": {"preset": "tri3"}, "sed": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"data": {"preset": "tri3"}, "cluster": {"iters": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"data": {"preset": "tri3", "table": "x.csv"}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"data": {"preset": "tri3"}, "search": {"strategy": "z"}})"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"data": {"preset": "tri3"}, "seed": "seven"})"), ConfigError);
}

TEST_CASE("relative paths resolve against the config location") {
  const auto c = parse_pipeline_config(R"({"data": {"table": "t.csv"}, "output_dir": "out"})", "/base");
  CHECK(c.data.kind == DataSource::Kind::TableCsv);
  CHECK(std::filesystem::path(c.data.value) == std::filesystem::path("/base/t.csv"));
  CHECK(c.output_dir == std::filesystem::path("/base/out"));
}

TEST_CASE("config JSON round trip") {
  auto c = read_pipeline_config(data_file("pipeline_small.json"));
  const auto text = pipeline_config_json(c);
  const auto back = parse_pipeline_config(text);
  CHECK(pipeline_config_json(back) == text);
  CHECK(back.seed == 7);
  CHECK(back.search.search.strategy == Strategy::ClusterSpecific);
  CHECK(back.search.runs == 2);
  CHECK(back.data.n == std::optional<std::size_t>(2000));
}

TEST_CASE("covariate retention by median rho") {
  std::vector<RhoSummary> rho(4);
  rho[0].median = 0.5;
  rho[1].median = 0.0;
  rho[2].median = 0.01;
  rho[3].median = 0.009;
  CHECK(retained_covariates(rho, 0.01) == std::vector<std::size_t>{0, 2});
  CHECK(retained_covariates(rho, 0.0) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(retained_covariates(rho, 1.01).empty());
}

TEST_CASE("pipeline end to end with a reproducible manifest") {
  testing::TempDir dir;
  const auto config = small_config(dir / "run");
  const auto r = run_pipeline(config);
  CHECK(r.kept.size() + r.dropped.size() == 4);
  CHECK(r.log2_models_before == 6);
  CHECK(std::filesystem::exists(r.manifest));
  CHECK(r.search.runs.size() == 2);
  CHECK(r.report.find("model search") != std::string::npos);

  std::ifstream in(r.manifest);
  const auto m = json::parse(in);
  CHECK(m.at("seeds").at("simulate") == 7);
  CHECK(m.at("seeds").at("cluster") == 1007);
  CHECK(m.at("seeds").at("search") == 2007);
  CHECK(m.at("model_space").at("before") == "2^6");

  const auto hashes = manifest_hashes(r.manifest);
  for (const std::string name : {"data.csv", "trace.csv", "tgamma.csv", "models.csv", "runs.csv", "search.json",
                                 "profiles.csv", "report.txt"})
    CHECK(hashes.count(name) == 1);
  for (const auto& [path, hash] : hashes) CHECK(sha256_file(dir / "run" / path) == hash);

  const auto again = run_pipeline(config);
  CHECK(manifest_hashes(again.manifest) == hashes);
}

TEST_CASE("threshold zero keeps every covariate") {
  testing::TempDir dir;
  auto config = small_config(dir / "run");
  config.rho_threshold = 0.0;
  const auto r = run_pipeline(config);
  CHECK(r.dropped.empty());
  CHECK(r.kept.size() == 4);
}

TEST_CASE("a threshold above one leaves nothing to search") {
  testing::TempDir dir;
  auto config = small_config(dir / "run");
  config.rho_threshold = 1.01;
  try {
    run_pipeline(config);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("no covariates remain") != std::string::npos);
    CHECK(what.find("stage") == 0);
  }
}

TEST_CASE("single-run summaries collapse the quartiles") {
  testing::TempDir dir;
  auto config = small_config(dir / "run");
  config.search.runs = 1;
  const auto r = run_pipeline(config);
  const auto& q = r.search.iterations_to_best;
  CHECK(q.q1 == q.median);
  CHECK(q.q3 == q.median);

  const auto summary = read_experiment_json(dir / "run" / "search.json");
  CHECK(summary.runs == 1);
  CHECK(summary.iterations_to_best.median == q.median);
  CHECK(summary.acceptance.median == doctest::Approx(r.search.acceptance.median));
  CHECK_FALSE(summary.top_models.empty());
}
