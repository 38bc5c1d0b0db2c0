#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catgraph/dataset.hpp"
#include "catgraph/graph.hpp"

namespace catgraph {

// One mixture component: a graphical log-linear model over all P covariates
// with coefficients in design-column order (see LogLinearModel).
struct GeneratorComponent {
  Graph graph;
  Eigen::VectorXd beta;
  double weight = 1.0;
};

struct GeneratorSpec {
  std::string name;
  std::vector<GeneratorComponent> components;
  std::size_t n = 0;
  std::vector<int> levels;
  std::uint64_t seed = 0;
  std::vector<std::string> names;  // optional covariate labels

  // Throws ConfigError on bad weights or coefficient lengths.
  void validate() const;
};

// Largest linear predictor accepted by cell_probabilities.
inline constexpr double kMaxLinearPredictor = 700.0;

// Cell probabilities proportional to exp(X beta) over the full lattice, in
// contingency-table order.
std::vector<double> cell_probabilities(const Graph& graph, const Eigen::VectorXd& beta,
                                       std::span<const int> levels);

// Each subject draws a component by weight, then a cell from that component.
// Covariates isolated in every positive-weight component are drawn from their own main-effect
// multinomials, so only the connected covariates are ever materialized as a
// table. Subject i uses its own counter-based random stream.
CategoricalDataset generate(const GeneratorSpec& spec);

// Coefficients used by the presets: main effects alternate +/-main per
// non-baseline column, interaction columns get +/-interaction by the parity
// of the sum of their levels, or +interaction throughout when alternate is off.
Eigen::VectorXd preset_coefficients(const Graph& graph, std::span<const int> levels,
                                    double main = 0.3, double interaction = 0.7,
                                    bool alternate = true);

// Presets sim1..sim5 plus desk-scale extras (sim1-scaled, quad4, tri3).
std::vector<std::string> builtin_spec_names();
GeneratorSpec builtin_spec(const std::string& name);

GeneratorSpec read_generator_spec(const std::filesystem::path& path);
void write_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path);

}  // namespace catgraph
