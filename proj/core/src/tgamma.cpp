#include "catgraph/tgamma.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "catgraph/dataset.hpp"
#include "catgraph/error.hpp"
#include "csv.hpp"

namespace catgraph {

bool TGammaMatrix::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::pair<std::size_t, std::size_t> TGammaMatrix::argmax() const {
  std::pair<std::size_t, std::size_t> best{0, P > 1 ? 1 : 0};
  double top = -1.0;
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t b = a + 1; b < P; ++b)
      if (values[a * P + b] > top) {
        top = values[a * P + b];
        best = {a, b};
      }
  return best;
}

TGammaAccumulator::TGammaAccumulator(std::size_t P) : P_(P), raw_(P * P, 0) {}

void TGammaAccumulator::add(std::int64_t size, std::span<const std::uint8_t> gamma) {
  if (gamma.size() != P_) throw ConfigError("gamma vector has the wrong length");
  if (size < 2) return;
  for (std::size_t a = 0; a < P_; ++a) {
    if (!gamma[a]) continue;
    for (std::size_t b = a + 1; b < P_; ++b)
      if (gamma[b]) raw_[a * P_ + b] += size;
  }
}

void TGammaAccumulator::add_draw(const TraceDraw& draw) {
  for (const auto& c : draw.clusters) add(c.size, c.gamma);
  ++draws_;
}

void TGammaAccumulator::merge(const TGammaAccumulator& other) {
  if (other.P_ != P_) throw ConfigError("cannot merge accumulators of different sizes");
  for (std::size_t k = 0; k < raw_.size(); ++k) raw_[k] += other.raw_[k];
  draws_ += other.draws_;
}

TGammaMatrix TGammaAccumulator::finish(std::vector<std::string> names) const {
  TGammaMatrix m;
  m.P = P_;
  m.names = names.empty() ? std::vector<std::string>{} : std::move(names);
  if (m.names.empty())
    for (std::size_t p = 0; p < P_; ++p) m.names.push_back(default_covariate_name(p, P_));
  m.draws = draws_;
  m.raw.assign(P_ * P_, 0);
  m.values.assign(P_ * P_, 0.0);
  std::int64_t top = 0;
  for (std::size_t a = 0; a < P_; ++a)
    for (std::size_t b = a + 1; b < P_; ++b) {
      m.raw[a * P_ + b] = m.raw[b * P_ + a] = raw_[a * P_ + b];
      top = std::max(top, raw_[a * P_ + b]);
    }
  if (top > 0)
    for (std::size_t k = 0; k < m.raw.size(); ++k)
      m.values[k] = static_cast<double>(m.raw[k]) / static_cast<double>(top);
  return m;
}

TGammaMatrix accumulate(const ClusterTrace& trace) {
  TGammaAccumulator acc(trace.P());
  for (const auto& d : trace.draws) acc.add_draw(d);
  return acc.finish(trace.names);
}

TGammaMatrix uniform_tgamma(std::size_t P, std::vector<std::string> names) {
  TGammaMatrix m;
  m.P = P;
  m.names = std::move(names);
  if (m.names.empty())
    for (std::size_t p = 0; p < P; ++p) m.names.push_back(default_covariate_name(p, P));
  m.values.assign(P * P, 1.0);
  for (std::size_t p = 0; p < P; ++p) m.values[p * P + p] = 0.0;
  return m;
}

TGammaMatrix select(const TGammaMatrix& m, std::span<const std::size_t> covariates) {
  TGammaMatrix out;
  out.P = covariates.size();
  out.draws = m.draws;
  out.values.assign(out.P * out.P, 0.0);
  if (!m.raw.empty()) out.raw.assign(out.P * out.P, 0);
  for (std::size_t a = 0; a < out.P; ++a) {
    if (covariates[a] >= m.P) throw ConfigError("covariate index out of range");
    out.names.push_back(m.names[covariates[a]]);
    for (std::size_t b = 0; b < out.P; ++b) {
      if (a == b) continue;
      out.values[a * out.P + b] = m(covariates[a], covariates[b]);
      if (!m.raw.empty()) out.raw[a * out.P + b] = m.raw[covariates[a] * m.P + covariates[b]];
    }
  }
  return out;
}

void write_tgamma_csv(const TGammaMatrix& m, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out.precision(17);
  out << "covariate";
  for (const auto& name : m.names) out << ',' << detail::csv_escape(name);
  out << '\n';
  for (std::size_t a = 0; a < m.P; ++a) {
    out << detail::csv_escape(m.names[a]);
    for (std::size_t b = 0; b < m.P; ++b) {
      out << ',';
      if (b > a) out << m(a, b);
    }
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing " + path.string());
}

TGammaMatrix read_tgamma_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty matrix file " + path.string());
  auto header = detail::split_csv_line(line);
  if (header.size() < 2) throw ConfigError("matrix header needs at least one covariate");
  TGammaMatrix m;
  m.P = header.size() - 1;
  m.names.assign(header.begin() + 1, header.end());
  m.values.assign(m.P * m.P, 0.0);
  for (std::size_t a = 0; a < m.P; ++a) {
    if (!std::getline(in, line)) throw ConfigError("matrix file is missing rows: " + path.string());
    auto f = detail::split_csv_line(line);
    if (f.size() != m.P + 1 || detail::trim(f[0]) != detail::trim(m.names[a]))
      throw ConfigError("malformed matrix row " + std::to_string(a + 1) + " in " + path.string());
    for (std::size_t b = a + 1; b < m.P; ++b) {
      const std::string cell = detail::trim(f[b + 1]);
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::logic_error&) {
        throw ConfigError("bad matrix entry '" + cell + "' in " + path.string());
      }
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("matrix entry outside [0,1] in " + path.string());
      m.values[a * m.P + b] = m.values[b * m.P + a] = v;
    }
  }
  return m;
}

}  // namespace catgraph
