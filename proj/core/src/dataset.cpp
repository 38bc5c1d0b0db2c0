#include "catgraph/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include <json.hpp>

#include "catgraph/error.hpp"
#include "csv.hpp"

namespace catgraph {

using nlohmann::json;

std::string default_covariate_name(std::size_t p, std::size_t P) {
  if (P <= 26) return std::string(1, static_cast<char>('A' + p));
  return "x" + std::to_string(p + 1);
}

CategoricalDataset::CategoricalDataset(std::size_t n, std::vector<int> levels,
                                       std::vector<int> codes, std::vector<std::string> names)
    : n_(n), levels_(std::move(levels)), codes_(std::move(codes)), names_(std::move(names)) {
  if (n_ < 1) throw ConfigError("dataset needs at least one subject");
  if (levels_.size() < 2) throw ConfigError("dataset needs at least two covariates");
  for (std::size_t p = 0; p < levels_.size(); ++p)
    if (levels_[p] < 2)
      throw ConfigError("covariate " + std::to_string(p) + " has fewer than two levels");
  if (codes_.size() != n_ * levels_.size())
    throw ConfigError("code array size does not match n x P");
  if (!names_.empty() && names_.size() != levels_.size())
    throw ConfigError("names must have exactly P entries");
  const std::size_t P = levels_.size();
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t p = 0; p < P; ++p) {
      const int c = codes_[i * P + p];
      if (c < 0 || c >= levels_[p])
        throw ConfigError("code " + std::to_string(c) + " out of range at row " +
                          std::to_string(i) + ", covariate " + std::to_string(p));
    }
}

std::string CategoricalDataset::name(std::size_t p) const {
  return names_.empty() ? default_covariate_name(p, P()) : names_[p];
}

std::vector<std::string> CategoricalDataset::names() const {
  std::vector<std::string> out;
  for (std::size_t p = 0; p < P(); ++p) out.push_back(name(p));
  return out;
}

CategoricalDataset CategoricalDataset::select(std::span<const std::size_t> covariates) const {
  std::vector<int> levels;
  std::vector<std::string> names;
  for (std::size_t p : covariates) {
    if (p >= P()) throw ConfigError("covariate index out of range in select()");
    levels.push_back(levels_[p]);
    names.push_back(name(p));
  }
  std::vector<int> codes;
  codes.reserve(n_ * covariates.size());
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t p : covariates) codes.push_back(code(i, p));
  return CategoricalDataset(n_, std::move(levels), std::move(codes), std::move(names));
}

std::size_t cell_count(std::span<const int> levels) {
  std::size_t cells = 1;
  for (int m : levels) {
    if (m < 1) throw ConfigError("level counts must be positive");
    if (cells > kMaxTableCells / static_cast<std::size_t>(m))
      throw ConfigError("contingency table exceeds the 2^26 cell limit");
    cells *= static_cast<std::size_t>(m);
  }
  return cells;
}

std::size_t ContingencyTable::index(std::span<const int> cell) const {
  std::size_t idx = 0;
  for (std::size_t p = 0; p < levels.size(); ++p)
    idx = idx * static_cast<std::size_t>(levels[p]) + static_cast<std::size_t>(cell[p]);
  return idx;
}

std::vector<int> ContingencyTable::cell(std::size_t index) const {
  std::vector<int> out(levels.size());
  for (std::size_t p = levels.size(); p-- > 0;) {
    out[p] = static_cast<int>(index % static_cast<std::size_t>(levels[p]));
    index /= static_cast<std::size_t>(levels[p]);
  }
  return out;
}

std::vector<std::int64_t> ContingencyTable::margin(std::size_t p) const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(levels[p]), 0);
  std::size_t stride = 1;
  for (std::size_t q = levels.size(); q-- > p + 1;) stride *= static_cast<std::size_t>(levels[q]);
  const std::size_t m = static_cast<std::size_t>(levels[p]);
  for (std::size_t idx = 0; idx < counts.size(); ++idx) out[(idx / stride) % m] += counts[idx];
  return out;
}

ContingencyTable build_table(const CategoricalDataset& data) {
  ContingencyTable table;
  table.levels.assign(data.levels().begin(), data.levels().end());
  table.counts.assign(cell_count(table.levels), 0);
  table.names = data.names();
  for (std::size_t i = 0; i < data.n(); ++i) ++table.counts[table.index(data.row(i))];
  table.total = static_cast<std::int64_t>(data.n());
  return table;
}

MarginalFrequencies marginals(const CategoricalDataset& data) {
  MarginalFrequencies out;
  out.freq.resize(data.P());
  for (std::size_t p = 0; p < data.P(); ++p) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(data.levels(p)), 0);
    for (std::size_t i = 0; i < data.n(); ++i) ++counts[static_cast<std::size_t>(data.code(i, p))];
    out.freq[p].resize(counts.size());
    for (std::size_t x = 0; x < counts.size(); ++x)
      out.freq[p][x] = static_cast<double>(counts[x]) / static_cast<double>(data.n());
  }
  return out;
}

CategoricalDataset expand_table(const ContingencyTable& table) {
  if (table.total < 1) throw ConfigError("table has no observations");
  const std::size_t P = table.levels.size();
  std::vector<int> codes;
  codes.reserve(static_cast<std::size_t>(table.total) * P);
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto cell = table.cell(k);
    for (std::int64_t r = 0; r < table.counts[k]; ++r) codes.insert(codes.end(), cell.begin(), cell.end());
  }
  return CategoricalDataset(static_cast<std::size_t>(table.total), table.levels, std::move(codes), table.names);
}

// ---- files -----------------------------------------------------------------

std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta.json");
}

namespace {

struct Coder {
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index;
  bool frozen = false;

  int code(const std::string& label) {
    if (auto it = index.find(label); it != index.end()) return it->second;
    if (frozen) throw ConfigError("label '" + label + "' not present in metadata level map");
    const int c = static_cast<int>(labels.size());
    labels.push_back(label);
    index.emplace(label, c);
    return c;
  }
};

std::optional<json> load_metadata(const std::filesystem::path& csv) {
  const auto meta = metadata_path(csv);
  if (!std::filesystem::exists(meta)) return std::nullopt;
  auto in = detail::open_input(meta);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid metadata file '" + meta.string() + "': " + e.what());
  }
}

bool is_integer(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isdigit(ch); });
}

}  // namespace

LoadedDataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  const auto names = detail::split_csv_line(line);
  const std::size_t P = names.size();
  std::vector<Coder> coders(P);

  std::vector<int> fixed_levels;
  if (auto meta = load_metadata(path)) {
    try {
      const auto& maps = meta->at("level_labels");
      if (maps.size() != P) throw ConfigError("metadata level map does not match CSV header");
      for (std::size_t p = 0; p < P; ++p) {
        for (const auto& label : maps[p]) coders[p].code(label.get<std::string>());
        coders[p].frozen = true;
        fixed_levels.push_back(static_cast<int>(coders[p].labels.size()));
      }
    } catch (const json::exception& e) {
      throw ConfigError("invalid metadata for '" + path.string() + "': " + e.what());
    }
  }

  std::vector<int> codes;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != P)
      throw ConfigError("row " + std::to_string(n + 1) + " of '" + path.string() + "' has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(P));
    for (std::size_t p = 0; p < P; ++p) codes.push_back(coders[p].code(fields[p]));
    ++n;
  }

  std::vector<int> levels(P);
  LevelMaps maps;
  for (std::size_t p = 0; p < P; ++p) {
    levels[p] = fixed_levels.empty() ? static_cast<int>(coders[p].labels.size()) : fixed_levels[p];
    maps.labels.push_back(coders[p].labels);
  }
  return {CategoricalDataset(n, std::move(levels), std::move(codes), names), std::move(maps)};
}

void write_metadata(const CategoricalDataset& data, const LevelMaps& level_maps,
                    const std::filesystem::path& path) {
  json meta;
  meta["n"] = data.n();
  meta["P"] = data.P();
  meta["names"] = data.names();
  meta["levels"] = std::vector<int>(data.levels().begin(), data.levels().end());
  meta["level_labels"] = level_maps.labels;
  auto out = detail::open_output(path);
  out << meta.dump(2) << '\n';
}

void write_dataset_csv(const CategoricalDataset& data, const std::filesystem::path& path,
                       const LevelMaps* level_maps) {
  LevelMaps identity;
  if (level_maps == nullptr) {
    for (std::size_t p = 0; p < data.P(); ++p) {
      std::vector<std::string> labels;
      for (int x = 0; x < data.levels(p); ++x) labels.push_back(std::to_string(x));
      identity.labels.push_back(std::move(labels));
    }
    level_maps = &identity;
  }
  {
    auto out = detail::open_output(path);
    const auto names = data.names();
    for (std::size_t p = 0; p < data.P(); ++p)
      out << (p ? "," : "") << detail::csv_escape(names[p]);
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
      for (std::size_t p = 0; p < data.P(); ++p) {
        if (p) out << ',';
        out << detail::csv_escape(level_maps->labels[p][static_cast<std::size_t>(data.code(i, p))]);
      }
      out << '\n';
    }
  }
  write_metadata(data, *level_maps, metadata_path(path));
}

ContingencyTable read_table_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header.back() != "count")
    throw ConfigError("table CSV needs at least two covariate columns and a final 'count' column");
  const std::size_t P = header.size() - 1;

  std::vector<std::vector<std::string>> rows;
  std::vector<std::int64_t> row_counts;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != P + 1) throw ConfigError("malformed row in table CSV '" + path.string() + "'");
    std::int64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoll(fields.back(), &used);
      if (used != fields.back().size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("invalid count '" + fields.back() + "' in '" + path.string() + "'");
    }
    if (count < 0) throw ConfigError("negative count in '" + path.string() + "'");
    fields.pop_back();
    rows.push_back(std::move(fields));
    row_counts.push_back(count);
  }
  if (rows.empty()) throw ConfigError("table CSV '" + path.string() + "' has no rows");

  // Integer-only columns keep their codes; other columns code labels in order seen.
  std::vector<std::vector<int>> coded(rows.size(), std::vector<int>(P));
  std::vector<int> levels(P, 0);
  for (std::size_t p = 0; p < P; ++p) {
    const bool integral =
        std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return is_integer(r[p]); });
    Coder coder;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int c = integral ? std::stoi(rows[r][p]) : coder.code(rows[r][p]);
      coded[r][p] = c;
      levels[p] = std::max(levels[p], c + 1);
    }
    levels[p] = std::max(levels[p], 2);
  }

  ContingencyTable table;
  table.levels = levels;
  table.counts.assign(cell_count(levels), 0);
  table.names.assign(header.begin(), header.end() - 1);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    table.counts[table.index(coded[r])] += row_counts[r];
    table.total += row_counts[r];
  }
  if (table.total < 1) throw ConfigError("table CSV '" + path.string() + "' has zero total count");
  return table;
}

void write_table_csv(const ContingencyTable& table, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (std::size_t p = 0; p < table.levels.size(); ++p)
    out << detail::csv_escape(p < table.names.size() ? table.names[p]
                                                     : default_covariate_name(p, table.levels.size()))
        << ',';
  out << "count\n";
  for (std::size_t idx = 0; idx < table.counts.size(); ++idx) {
    const auto cell = table.cell(idx);
    for (int c : cell) out << c << ',';
    out << table.counts[idx] << '\n';
  }
}

}  // namespace catgraph
