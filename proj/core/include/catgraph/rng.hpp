#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace catgraph {

// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Counter-based uniform in [0,1): a pure function of (seed, stream, counter).
// Each subject index gets its own stream, so generation is order-independent.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

// Index i such that u falls in the i-th slice of the normalized weights.
// When every weight is equal the result is exactly floor(u * size), so a flat
// weighting reproduces uniform selection draw for draw.
std::size_t sample_index(std::span<const double> weights, double u);

// Sequential generator for MCMC chains. Deterministic for a given seed on a
// given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0,1).
  double uniform();
  // Uniform on (0,1).
  double uniform_open();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Gamma(shape, rate).
  double gamma(double shape, double rate = 1.0);
  // log of a Gamma(shape, 1) draw; stays finite for very small shapes.
  double log_gamma_draw(double shape);
  double beta(double a, double b);
  void dirichlet(std::span<const double> concentration, std::span<double> out);

  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);
  // Index drawn proportionally to exp(log_weights).
  std::size_t categorical_log(std::span<const double> log_weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace catgraph
