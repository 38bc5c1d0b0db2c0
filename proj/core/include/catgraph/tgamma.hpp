#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "catgraph/dpcluster.hpp"

namespace catgraph {

// Symmetric P x P co-selection weights in [0,1] with a zero diagonal.
struct TGammaMatrix {
  std::size_t P = 0;
  std::vector<std::string> names;
  std::vector<double> values;      // P*P, row-major, symmetric
  std::vector<std::int64_t> raw;   // unnormalized sums, empty for hand-built matrices
  std::size_t draws = 0;           // trace iterations that fed the sums

  double operator()(std::size_t a, std::size_t b) const { return values[a * P + b]; }
  bool is_zero() const;
  // Pair with the largest entry (first in lexicographic order on ties).
  std::pair<std::size_t, std::size_t> argmax() const;
};

// Exact integer accumulation; merge() is associative and commutative, so
// draws may be reduced in any order.
class TGammaAccumulator {
 public:
  explicit TGammaAccumulator(std::size_t P);

  // One cluster of one iteration. Clusters with fewer than two subjects are ignored.
  void add(std::int64_t size, std::span<const std::uint8_t> gamma);
  void add_draw(const TraceDraw& draw);
  void merge(const TGammaAccumulator& other);

  std::int64_t raw(std::size_t a, std::size_t b) const { return raw_[a * P_ + b]; }
  TGammaMatrix finish(std::vector<std::string> names = {}) const;

 private:
  std::size_t P_;
  std::vector<std::int64_t> raw_;
  std::size_t draws_ = 0;
};

TGammaMatrix accumulate(const ClusterTrace& trace);

// Every pair weighted 1 (uniform edge proposals).
TGammaMatrix uniform_tgamma(std::size_t P, std::vector<std::string> names = {});

// Sub-matrix over the given covariates, in the given order; not renormalized.
TGammaMatrix select(const TGammaMatrix& m, std::span<const std::size_t> covariates);

// CSV with a header of names; row p holds entries (p, q) for q > p, the rest blank.
void write_tgamma_csv(const TGammaMatrix& m, const std::filesystem::path& path);
TGammaMatrix read_tgamma_csv(const std::filesystem::path& path);

}  // namespace catgraph
