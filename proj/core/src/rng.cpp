#include "catgraph/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "catgraph/error.hpp"

namespace catgraph {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (counter * 0x8cb92ba72f3d8dd7ULL + 0x632be59bd9b4e019ULL));
  // 53 random bits -> [0,1)
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::size_t sample_index(std::span<const double> weights, double u) {
  const std::size_t k = weights.size();
  if (k == 0) throw NumericalError("sample_index: empty weight vector");
  const bool flat = std::all_of(weights.begin(), weights.end(),
                                [&](double w) { return w == weights.front(); });
  if (flat) return std::min(static_cast<std::size_t>(u * static_cast<double>(k)), k - 1);

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("sample_index: weights must have a positive finite sum");
  const double target = u * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  // Rounding at the top end: return the last positive weight.
  for (std::size_t i = k; i-- > 0;)
    if (weights[i] > 0.0) return i;
  return k - 1;
}

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return u;
}

double Rng::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::log_gamma_draw(double shape) {
  if (!(shape > 0.0)) throw NumericalError("gamma draw requires a positive shape");
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    double g = dist(engine_);
    while (g <= 0.0) g = dist(engine_);
    return std::log(g);
  }
  // Gamma(a) = Gamma(a+1) * U^(1/a), evaluated in logs.
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  double g = dist(engine_);
  while (g <= 0.0) g = dist(engine_);
  return std::log(g) + std::log(uniform_open()) / shape;
}

double Rng::gamma(double shape, double rate) {
  if (!(rate > 0.0)) throw NumericalError("gamma draw requires a positive rate");
  return std::exp(log_gamma_draw(shape)) / rate;
}

double Rng::beta(double a, double b) {
  const double lx = log_gamma_draw(a);
  const double ly = log_gamma_draw(b);
  const double m = std::max(lx, ly);
  const double lse = m + std::log(std::exp(lx - m) + std::exp(ly - m));
  double x = std::exp(lx - lse);
  // Keep strictly inside (0,1) so that logs of sticks stay finite.
  constexpr double tiny = std::numeric_limits<double>::min();
  return std::clamp(x, tiny, 1.0 - std::numeric_limits<double>::epsilon() / 2);
}

void Rng::dirichlet(std::span<const double> concentration, std::span<double> out) {
  const std::size_t k = concentration.size();
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = log_gamma_draw(concentration[i]);
    m = std::max(m, out[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = std::exp(out[i] - m);
    total += out[i];
  }
  for (std::size_t i = 0; i < k; ++i) out[i] /= total;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  return sample_index(weights, uniform());
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  const std::size_t k = log_weights.size();
  double m = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw)) throw NumericalError("categorical_log: NaN log weight");
    m = std::max(m, lw);
  }
  if (!std::isfinite(m)) throw NumericalError("categorical_log: no finite log weight");
  const double target = uniform();
  double total = 0.0;
  // Two passes: normalizer, then inversion.
  for (double lw : log_weights) total += std::exp(lw - m);
  double acc = 0.0;
  const double threshold = target * total;
  for (std::size_t i = 0; i < k; ++i) {
    acc += std::exp(log_weights[i] - m);
    if (threshold < acc) return i;
  }
  for (std::size_t i = k; i-- > 0;)
    if (std::isfinite(log_weights[i])) return i;
  return k - 1;
}

}  // namespace catgraph
