#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "catgraph/dataset.hpp"
#include "catgraph/dpcluster.hpp"

namespace catgraph {

// Dense n x n co-clustering proportions. Only sensible for modest n.
std::vector<double> similarity_matrix(const ClusterTrace& trace);

struct RepresentativePartition {
  std::vector<int> labels;            // 1..K per subject, 1 = largest cluster
  std::vector<std::int64_t> sizes;    // sizes[k-1]
  double score = 0.0;                 // sum over (i,j) of (coclustered - similarity)^2
  std::size_t draw = 0;               // index of the chosen retained draw

  int clusters() const { return static_cast<int>(sizes.size()); }
};

struct RepresentativeOptions {
  // Traces longer than this are thinned evenly before scoring.
  std::size_t max_draws = 500;
};

// The retained partition closest to the similarity matrix; ties go to the
// earliest draw. Works from pairwise label contingency tables, so memory stays
// linear in n.
RepresentativePartition representative_partition(const ClusterTrace& trace,
                                                  const RepresentativeOptions& options = {});

enum class ProfileSymbol { Below, Neutral, Above };

char symbol_char(ProfileSymbol s);

struct ProfileCell {
  ProfileSymbol symbol = ProfileSymbol::Neutral;
  double lower = 0.0;  // 2.5% quantile of phi# - pi
  double upper = 0.0;  // 97.5% quantile
  double mean = 0.0;
};

struct ProfileCluster {
  int label = 0;
  std::int64_t size = 0;
  std::size_t samples = 0;                    // aligned draws contributing
  std::vector<std::vector<ProfileCell>> cells; // [p][x]
};

struct ProfileTable {
  std::vector<std::string> names;
  std::vector<int> levels;
  std::vector<double> median_rho;
  std::vector<ProfileCluster> clusters;
  std::vector<std::string> warnings;
};

ProfileTable profile_table(const ClusterTrace& trace, const RepresentativePartition& partition);

// Aligned text: one row per cluster, one symbol per covariate level.
std::string format_profile_table(const ProfileTable& table);
void write_profile_csv(const ProfileTable& table, const std::filesystem::path& path);

}  // namespace catgraph
