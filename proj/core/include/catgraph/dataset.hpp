#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace catgraph {

// Covariate labels: letters A..Z when P <= 26, otherwise x1..xP.
std::string default_covariate_name(std::size_t p, std::size_t P);

// n subjects by P categorical covariates; codes are 0-based level indices.
// Immutable after construction.
class CategoricalDataset {
 public:
  CategoricalDataset(std::size_t n, std::vector<int> levels, std::vector<int> codes,
                     std::vector<std::string> names = {});

  std::size_t n() const { return n_; }
  std::size_t P() const { return levels_.size(); }
  int levels(std::size_t p) const { return levels_[p]; }
  std::span<const int> levels() const { return levels_; }
  int code(std::size_t i, std::size_t p) const { return codes_[i * P() + p]; }
  std::span<const int> row(std::size_t i) const { return {codes_.data() + i * P(), P()}; }
  std::span<const int> codes() const { return codes_; }

  bool has_names() const { return !names_.empty(); }
  std::string name(std::size_t p) const;
  std::vector<std::string> names() const;

  // Dataset restricted to the given covariates, in the given order.
  CategoricalDataset select(std::span<const std::size_t> covariates) const;

 private:
  std::size_t n_;
  std::vector<int> levels_;
  std::vector<int> codes_;
  std::vector<std::string> names_;
};

// Largest table the library will materialize.
inline constexpr std::size_t kMaxTableCells = std::size_t{1} << 26;

// Number of cells of a lattice with the given per-dimension sizes; throws
// ConfigError past kMaxTableCells.
std::size_t cell_count(std::span<const int> levels);

// Dense P-way table. Cell (l_1..l_P) lives at the lexicographic index with the
// last covariate varying fastest.
struct ContingencyTable {
  std::vector<int> levels;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  std::vector<std::string> names;

  std::size_t size() const { return counts.size(); }
  std::size_t index(std::span<const int> cell) const;
  std::vector<int> cell(std::size_t index) const;
  // Counts summed over every axis except p.
  std::vector<std::int64_t> margin(std::size_t p) const;
};

ContingencyTable build_table(const CategoricalDataset& data);

// pi_p(x): empirical proportion of level x at covariate p.
struct MarginalFrequencies {
  std::vector<std::vector<double>> freq;

  double operator()(std::size_t p, int x) const { return freq[p][static_cast<std::size_t>(x)]; }
  std::size_t P() const { return freq.size(); }
};

MarginalFrequencies marginals(const CategoricalDataset& data);

// One subject per counted observation, in cell order.
CategoricalDataset expand_table(const ContingencyTable& table);

// ---- files -----------------------------------------------------------------

// Per-covariate level labels; labels[p][code] is the original string.
struct LevelMaps {
  std::vector<std::vector<std::string>> labels;
};

struct LoadedDataset {
  CategoricalDataset data;
  LevelMaps level_maps;
};

// Sidecar path used for a CSV file: "<csv>.meta.json".
std::filesystem::path metadata_path(const std::filesystem::path& csv);

// Reads a header row of names then one row per subject. Labels are coded in
// first-seen order unless a metadata sidecar is present, in which case its
// level maps (and level counts) are used.
LoadedDataset read_dataset_csv(const std::filesystem::path& path);

// Writes the CSV plus its metadata sidecar. Without level maps, codes are
// written as their integer values.
void write_dataset_csv(const CategoricalDataset& data, const std::filesystem::path& path,
                       const LevelMaps* level_maps = nullptr);

void write_metadata(const CategoricalDataset& data, const LevelMaps& level_maps,
                    const std::filesystem::path& path);

// Table CSV: covariate columns then a final "count" column, one row per cell.
// Absent cells count zero. Labels are coded as for datasets; purely integer
// columns keep their integer codes.
ContingencyTable read_table_csv(const std::filesystem::path& path);
void write_table_csv(const ContingencyTable& table, const std::filesystem::path& path);

}  // namespace catgraph
