#include "catgraph/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "catgraph/error.hpp"
#include "csv.hpp"

namespace catgraph {

namespace {

void require_allocations(const ClusterTrace& trace) {
  if (trace.draws.empty()) throw ConfigError("empty trace");
  if (!trace.has_allocations()) throw ConfigError("trace does not record allocations");
}

// Dense relabeling of a draw's allocations to 0..K-1.
std::vector<int> compact(const std::vector<int>& z, int& K) {
  std::vector<int> map;
  std::vector<int> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto c = static_cast<std::size_t>(z[i]);
    if (c >= map.size()) map.resize(c + 1, -1);
    if (map[c] < 0) map[c] = static_cast<int>(std::count_if(map.begin(), map.end(), [](int v) { return v >= 0; }));
    out[i] = map[c];
  }
  K = static_cast<int>(std::count_if(map.begin(), map.end(), [](int v) { return v >= 0; }));
  return out;
}

// Number of ordered pairs (i,j) co-clustered in both partitions.
double shared_pairs(const std::vector<int>& a, int Ka, const std::vector<int>& b, int Kb,
                    std::vector<std::int64_t>& scratch) {
  scratch.assign(static_cast<std::size_t>(Ka) * static_cast<std::size_t>(Kb), 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    ++scratch[static_cast<std::size_t>(a[i]) * static_cast<std::size_t>(Kb) + static_cast<std::size_t>(b[i])];
  double total = 0.0;
  for (auto m : scratch) total += static_cast<double>(m) * static_cast<double>(m);
  return total;
}

}  // namespace

std::vector<double> similarity_matrix(const ClusterTrace& trace) {
  require_allocations(trace);
  const std::size_t n = trace.n;
  std::vector<double> S(n * n, 0.0);
  for (const auto& d : trace.draws)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        if (d.z[i] == d.z[j]) S[i * n + j] += 1.0;
  const double T = static_cast<double>(trace.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) S[i * n + j] = S[j * n + i] = S[i * n + j] / T;
  return S;
}

RepresentativePartition representative_partition(const ClusterTrace& trace,
                                                  const RepresentativeOptions& options) {
  require_allocations(trace);
  std::vector<std::size_t> used;
  const std::size_t T_all = trace.size();
  const std::size_t cap = std::max<std::size_t>(1, options.max_draws);
  if (T_all <= cap) {
    used.resize(T_all);
    std::iota(used.begin(), used.end(), std::size_t{0});
  } else {
    for (std::size_t k = 0; k < cap; ++k) used.push_back(k * T_all / cap);
  }
  const std::size_t T = used.size();
  std::vector<std::vector<int>> parts(T);
  std::vector<int> K(T);
  for (std::size_t t = 0; t < T; ++t) parts[t] = compact(trace.draws[used[t]].z, K[t]);

  // A(t,s) = number of ordered pairs co-clustered in both draws.
  std::vector<double> A(T * T);
  std::vector<std::int64_t> scratch;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = t; s < T; ++s)
      A[t * T + s] = A[s * T + t] = shared_pairs(parts[t], K[t], parts[s], K[s], scratch);
  double grand = 0.0;
  std::vector<double> row_sum(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < T; ++s) row_sum[t] += A[t * T + s];
    grand += row_sum[t];
  }
  const double Td = static_cast<double>(T);
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double score = A[t * T + t] - 2.0 * row_sum[t] / Td + grand / (Td * Td);
    if (t == 0 || score < best_score - 1e-9 * std::max(1.0, std::abs(best_score))) {
      best = t;
      best_score = score;
    }
  }

  RepresentativePartition rep;
  rep.draw = used[best];
  rep.score = std::max(0.0, best_score);
  const auto& z = parts[best];
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(K[best]), 0);
  for (int c : z) ++sizes[static_cast<std::size_t>(c)];
  // Compact labels are already in first-appearance order; stable sort by size keeps that on ties.
  std::vector<int> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)];
  });
  std::vector<int> relabel(sizes.size());
  for (std::size_t k = 0; k < order.size(); ++k) relabel[static_cast<std::size_t>(order[k])] = static_cast<int>(k) + 1;
  rep.labels.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) rep.labels[i] = relabel[static_cast<std::size_t>(z[i])];
  for (int k : order) rep.sizes.push_back(sizes[static_cast<std::size_t>(k)]);
  return rep;
}

char symbol_char(ProfileSymbol s) {
  switch (s) {
    case ProfileSymbol::Below: return '<';
    case ProfileSymbol::Above: return '>';
    default: return '0';
  }
}

ProfileTable profile_table(const ClusterTrace& trace, const RepresentativePartition& partition) {
  require_allocations(trace);
  if (partition.labels.size() != trace.n) throw ConfigError("partition does not match the trace");
  const std::size_t P = trace.P();
  const auto offsets = trace.phi_offsets();
  const std::size_t L = static_cast<std::size_t>(offsets.back());
  const int K = partition.clusters();

  ProfileTable table;
  table.names = trace.names;
  if (table.names.size() != trace.P()) {
    table.names.clear();
    for (std::size_t p = 0; p < trace.P(); ++p) table.names.push_back(default_covariate_name(p, trace.P()));
  }
  table.levels = trace.levels;
  for (const auto& r : posterior_rho_summary(trace)) table.median_rho.push_back(r.median);

  // samples[k][l] collects phi# - pi for flattened level l.
  std::vector<std::vector<std::vector<double>>> samples(
      static_cast<std::size_t>(K), std::vector<std::vector<double>>(L));
  std::vector<std::size_t> aligned(static_cast<std::size_t>(K), 0);
  std::vector<std::int64_t> overlap;
  for (const auto& d : trace.draws) {
    int C = 0;
    for (const auto& c : d.clusters) C = std::max(C, c.label + 1);
    for (int zi : d.z) C = std::max(C, zi + 1);
    overlap.assign(static_cast<std::size_t>(C) * static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < trace.n; ++i)
      ++overlap[static_cast<std::size_t>(d.z[i]) * static_cast<std::size_t>(K) +
                static_cast<std::size_t>(partition.labels[i] - 1)];
    std::vector<char> seen(static_cast<std::size_t>(K), 0);
    for (const auto& c : d.clusters) {
      if (c.phi.size() != L) throw ConfigError("trace does not record phi");
      const auto* row = overlap.data() + static_cast<std::size_t>(c.label) * static_cast<std::size_t>(K);
      const auto k = static_cast<std::size_t>(std::max_element(row, row + K) - row);
      if (row[k] == 0) continue;
      seen[k] = 1;
      for (std::size_t p = 0; p < P; ++p)
        for (int x = 0; x < trace.levels[p]; ++x) {
          const std::size_t l = static_cast<std::size_t>(offsets[p] + x);
          const double pi = trace.marginals(p, x);
          samples[k][l].push_back(c.gamma[p] ? c.phi[l] - pi : 0.0);
        }
    }
    for (int k = 0; k < K; ++k) aligned[static_cast<std::size_t>(k)] += seen[static_cast<std::size_t>(k)];
  }

  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    ProfileCluster pc;
    pc.label = k + 1;
    pc.size = partition.sizes[ku];
    pc.samples = aligned[ku];
    const bool enough = aligned[ku] >= 2;
    if (!enough)
      table.warnings.push_back("cluster " + std::to_string(k + 1) + " aligned with fewer than two draws");
    pc.cells.resize(P);
    for (std::size_t p = 0; p < P; ++p)
      for (int x = 0; x < trace.levels[p]; ++x) {
        ProfileCell cell;
        const auto& v = samples[ku][static_cast<std::size_t>(offsets[p] + x)];
        if (!v.empty()) {
          cell.lower = empirical_quantile(v, 0.025);
          cell.upper = empirical_quantile(v, 0.975);
          cell.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        }
        if (enough) {
          if (cell.upper < 0.0) cell.symbol = ProfileSymbol::Below;
          else if (cell.lower > 0.0) cell.symbol = ProfileSymbol::Above;
        }
        pc.cells[p].push_back(cell);
      }
    table.clusters.push_back(std::move(pc));
  }
  return table;
}

std::string format_profile_table(const ProfileTable& table) {
  const std::size_t P = table.names.size();
  std::vector<std::size_t> width(P);
  for (std::size_t p = 0; p < P; ++p)
    width[p] = std::max<std::size_t>({table.names[p].size(), static_cast<std::size_t>(table.levels[p]), 4});
  std::ostringstream out;
  out << std::left << std::setw(9) << "cluster" << std::setw(8) << "size";
  for (std::size_t p = 0; p < P; ++p) out << ' ' << std::setw(static_cast<int>(width[p])) << table.names[p];
  out << '\n';
  for (const auto& c : table.clusters) {
    out << std::setw(9) << c.label << std::setw(8) << c.size;
    for (std::size_t p = 0; p < P; ++p) {
      std::string s;
      for (const auto& cell : c.cells[p]) s += symbol_char(cell.symbol);
      out << ' ' << std::setw(static_cast<int>(width[p])) << s;
    }
    out << '\n';
  }
  out << std::setw(17) << "median rho";
  for (std::size_t p = 0; p < P; ++p) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << table.median_rho[p];
    out << ' ' << std::setw(static_cast<int>(width[p])) << v.str();
  }
  out << '\n';
  return out.str();
}

void write_profile_csv(const ProfileTable& table, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out.precision(10);
  out << "cluster,size,covariate,level,symbol,lower,upper,mean\n";
  for (const auto& c : table.clusters)
    for (std::size_t p = 0; p < c.cells.size(); ++p)
      for (std::size_t x = 0; x < c.cells[p].size(); ++x) {
        const auto& cell = c.cells[p][x];
        out << c.label << ',' << c.size << ',' << detail::csv_escape(table.names[p]) << ',' << x << ','
            << symbol_char(cell.symbol) << ',' << cell.lower << ',' << cell.upper << ',' << cell.mean << '\n';
      }
  if (!out) throw ConfigError("failed writing " + path.string());
}

}  // namespace catgraph
