#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "catgraph/dpcluster.hpp"
#include "catgraph/profiles.hpp"
#include "catgraph/search.hpp"

namespace catgraph {

// Stage seed = global seed + offset.
inline constexpr std::uint64_t kSimulateSeedOffset = 0;
inline constexpr std::uint64_t kClusterSeedOffset = 1000;
inline constexpr std::uint64_t kSearchSeedOffset = 2000;

struct DataSource {
  enum class Kind { Preset, GeneratorFile, DatasetCsv, TableCsv };
  Kind kind = Kind::Preset;
  std::string value;             // preset name or file path
  std::optional<std::size_t> n;  // overrides the generator's sample size
};

struct ClusterStageConfig {
  PriorConfig priors;
  std::size_t burnin = 1000;
  std::size_t iterations = 2000;
  std::size_t thin = 1;
  std::size_t max_representative_draws = 500;
};

struct SearchStageConfig {
  SearchConfig search;  // seed is ignored, the stage seed is used
  std::size_t runs = 1;
  unsigned threads = 1;
  PriorSettings prior;
};

struct PipelineConfig {
  DataSource data;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "catgraph-out";
  ClusterStageConfig cluster;
  double rho_threshold = 0.01;
  SearchStageConfig search;
};

// Unknown keys are rejected; missing keys keep their defaults. Relative
// paths inside the document resolve against base_dir.
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir = {});
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
std::string pipeline_config_json(const PipelineConfig& config);

// Covariates whose posterior median rho is at least the threshold, in order.
std::vector<std::size_t> retained_covariates(const std::vector<RhoSummary>& rho, double threshold);

struct PipelineResult {
  std::vector<std::string> kept;
  std::vector<std::string> dropped;
  std::size_t log2_models_before = 0;  // P(P-1)/2 before reduction
  std::size_t log2_models_after = 0;
  std::vector<RhoSummary> rho;
  RepresentativePartition partition;
  ProfileTable profiles;
  ExperimentResult search;
  std::string report;
  std::filesystem::path manifest;
};

// simulate (or load) -> cluster -> tgamma -> reduce -> search -> report.
// Every output lands in config.output_dir together with manifest.json.
PipelineResult run_pipeline(const PipelineConfig& config);

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// ---- reports ----------------------------------------------------------------

std::string format_rho_summary(const std::vector<RhoSummary>& rho, const std::vector<std::string>& names);

// Search summaries persist as JSON so `report` can combine them later.
void write_experiment_json(const ExperimentResult& result, const std::vector<std::string>& names,
                           const SearchConfig& config, const std::filesystem::path& path);

struct ExperimentSummary {
  std::string strategy;
  std::size_t runs = 0;
  Quartiles acceptance;
  Quartiles iterations_to_best;
  std::size_t missed_best = 0;
  std::string best;
  std::vector<std::pair<std::string, double>> top_models;
};

ExperimentSummary read_experiment_json(const std::filesystem::path& path);

// Profile and rho blocks per trace, then one mixing block per search summary.
std::string build_report(const std::vector<ClusterTrace>& traces,
                         const std::vector<ExperimentSummary>& searches);

}  // namespace catgraph
