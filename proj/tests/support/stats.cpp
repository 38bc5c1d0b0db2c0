#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace catgraph::testing {

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

namespace {

double chi_square_p(double stat, double dof) {
  if (dof < 1.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

}  // namespace

TestResult chi_square_two_sample(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  const double na = static_cast<double>(std::accumulate(a.begin(), a.end(), std::int64_t{0}));
  const double nb = static_cast<double>(std::accumulate(b.begin(), b.end(), std::int64_t{0}));
  // Pool bins left to right into groups whose expected counts reach 5 in both samples.
  std::vector<std::pair<double, double>> bins;
  double ca = 0.0, cb = 0.0;
  for (std::size_t k = 0; k < std::max(a.size(), b.size()); ++k) {
    ca += k < a.size() ? static_cast<double>(a[k]) : 0.0;
    cb += k < b.size() ? static_cast<double>(b[k]) : 0.0;
    const double pooled = (ca + cb) / (na + nb);
    if (pooled * std::min(na, nb) >= 5.0) {
      bins.emplace_back(ca, cb);
      ca = cb = 0.0;
    }
  }
  if (ca + cb > 0.0) {
    if (bins.empty()) bins.emplace_back(ca, cb);
    else {
      bins.back().first += ca;
      bins.back().second += cb;
    }
  }
  double stat = 0.0;
  for (auto [x, y] : bins) {
    const double pooled = (x + y) / (na + nb);
    const double ea = pooled * na, eb = pooled * nb;
    if (ea > 0.0) stat += (x - ea) * (x - ea) / ea;
    if (eb > 0.0) stat += (y - eb) * (y - eb) / eb;
  }
  return {stat, chi_square_p(stat, static_cast<double>(bins.size()) - 1.0)};
}

TestResult chi_square_fit(const std::vector<std::int64_t>& observed, const std::vector<double>& probs) {
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::int64_t{0}));
  std::vector<std::pair<double, double>> bins;
  double o = 0.0, e = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    o += static_cast<double>(observed[k]);
    e += probs[k] * n;
    if (e >= 5.0) {
      bins.emplace_back(o, e);
      o = e = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (bins.empty()) bins.emplace_back(o, e);
    else {
      bins.back().first += o;
      bins.back().second += e;
    }
  }
  double stat = 0.0;
  for (auto [x, ex] : bins)
    if (ex > 0.0) stat += (x - ex) * (x - ex) / ex;
  return {stat, chi_square_p(stat, static_cast<double>(bins.size()) - 1.0)};
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < std::max(p.size(), q.size()); ++k)
    s += std::abs((k < p.size() ? p[k] : 0.0) - (k < q.size() ? q[k] : 0.0));
  return 0.5 * s;
}

}  // namespace catgraph::testing
