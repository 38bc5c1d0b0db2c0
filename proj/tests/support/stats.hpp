#pragma once

#include <cstdint>
#include <vector>

namespace catgraph::testing {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov with the asymptotic Kolmogorov distribution.
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

// Chi-square test of homogeneity for two count vectors over the same bins.
// Bins are pooled from the right until every expected count is at least 5.
TestResult chi_square_two_sample(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

// Goodness of fit of observed counts to probabilities, pooling small expected bins.
TestResult chi_square_fit(const std::vector<std::int64_t>& observed, const std::vector<double>& probs);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace catgraph::testing
