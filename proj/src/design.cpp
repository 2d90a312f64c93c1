#include "surveycalib/design.hpp"

#include "surveycalib/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace surveycalib {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kEnumerationLimit = 1'000'000;

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream_id)
    : key_(mix64(seed ^ mix64(stream_id + kGolden))) {}

std::uint64_t CounterRng::next() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

std::uint64_t CounterRng::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_below needs a positive bound");
  unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double CounterRng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

void DesignSpec::validate() const {
  if (population_size < 1) throw std::invalid_argument("population size must be positive");
  if (sample_size < 1 || sample_size > population_size)
    throw std::invalid_argument("sample size n=" + std::to_string(sample_size) +
                                " outside [1, N=" + std::to_string(population_size) + "]");
}

Vector InclusionProbs::first_order() const {
  Vector pi(population_size());
  for (Index k = 0; k < pi.size(); ++k) pi(k) = first(k);
  return pi;
}

Matrix InclusionProbs::second_order() const {
  const Index N = population_size();
  Matrix pi(N, N);
  for (Index k = 0; k < N; ++k)
    for (Index l = 0; l < N; ++l) pi(k, l) = joint(k, l);
  return pi;
}

SrsworInclusion::SrsworInclusion(Index population_size, Index sample_size)
    : N_(population_size), n_(sample_size) {
  DesignSpec{DesignKind::Srswor, n_, N_, 0}.validate();
}

double SrsworInclusion::first(Index) const {
  return static_cast<double>(n_) / static_cast<double>(N_);
}

double SrsworInclusion::joint(Index k, Index l) const {
  if (k == l) return first(k);
  if (N_ == 1) return 0.0;
  return static_cast<double>(n_) * static_cast<double>(n_ - 1) /
         (static_cast<double>(N_) * static_cast<double>(N_ - 1));
}

std::unique_ptr<InclusionProbs> inclusion_probs(const DesignSpec& spec) {
  spec.validate();
  return std::make_unique<SrsworInclusion>(spec.population_size, spec.sample_size);
}

std::vector<Index> draw_indices(Index population_size, Index sample_size, std::uint64_t seed,
                                std::uint64_t replicate_id) {
  DesignSpec{DesignKind::Srswor, sample_size, population_size, seed}.validate();
  std::vector<Index> pool(static_cast<std::size_t>(population_size));
  std::iota(pool.begin(), pool.end(), Index{0});
  CounterRng rng(seed, replicate_id);
  for (Index i = 0; i < sample_size; ++i) {
    const auto remaining = static_cast<std::uint64_t>(population_size - i);
    const auto j = i + static_cast<Index>(rng.uniform_below(remaining));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(sample_size));
  std::sort(pool.begin(), pool.end());
  return pool;
}

SampleData draw_sample(const PopulationFrame& frame, const DesignSpec& spec,
                       std::uint64_t replicate_id) {
  if (spec.population_size != frame.size())
    throw std::invalid_argument("design population size does not match the frame");
  auto indices = draw_indices(spec.population_size, spec.sample_size, spec.seed, replicate_id);
  const double d = static_cast<double>(spec.population_size) / static_cast<double>(spec.sample_size);
  return SampleData::from_frame(frame, std::move(indices), Vector::Constant(spec.sample_size, d));
}

double ht_total(const SampleData& sample, const Vector& values) {
  if (values.size() != sample.size())
    throw std::invalid_argument("value vector length does not match the sample size");
  return sample.design_weights().dot(values);
}

Vector ht_total(const SampleData& sample, const Matrix& values) {
  if (values.rows() != sample.size())
    throw std::invalid_argument("value matrix rows do not match the sample size");
  return values.transpose() * sample.design_weights();
}

std::uint64_t binomial(Index N, Index n) {
  if (n < 0 || n > N) return 0;
  n = std::min(n, N - n);
  unsigned __int128 acc = 1;
  for (Index i = 1; i <= n; ++i) {
    acc = acc * static_cast<unsigned __int128>(N - n + i) / static_cast<unsigned __int128>(i);
    if (acc > std::numeric_limits<std::uint64_t>::max())
      return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(acc);
}

std::vector<std::pair<SampleData, double>> enumerate_all_samples(const PopulationFrame& frame,
                                                                 const DesignSpec& spec) {
  spec.validate();
  if (spec.population_size != frame.size())
    throw std::invalid_argument("design population size does not match the frame");
  const std::uint64_t count = binomial(spec.population_size, spec.sample_size);
  if (count > kEnumerationLimit)
    throw std::invalid_argument("C(N, n) = " + std::to_string(count) +
                                " exceeds the enumeration limit of 1e6");

  const Index n = spec.sample_size;
  const double prob = 1.0 / static_cast<double>(count);
  const double d = static_cast<double>(spec.population_size) / static_cast<double>(n);
  std::vector<std::pair<SampleData, double>> out;
  out.reserve(static_cast<std::size_t>(count));

  std::vector<Index> combo(static_cast<std::size_t>(n));
  std::iota(combo.begin(), combo.end(), Index{0});
  while (true) {
    out.emplace_back(SampleData::from_frame(frame, combo, Vector::Constant(n, d)), prob);
    Index i = n - 1;
    while (i >= 0 && combo[static_cast<std::size_t>(i)] == spec.population_size - n + i) --i;
    if (i < 0) break;
    ++combo[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < n; ++j)
      combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

double ht_variance_estimator(const SampleData& sample, const InclusionProbs& probs,
                             const Vector& residuals) {
  const Index n = sample.size();
  if (residuals.size() != n) throw std::invalid_argument("residual length does not match sample");
  const auto& idx = sample.indices();
  const Vector& d = sample.design_weights();
  double total = 0.0;
  for (Index a = 0; a < n; ++a) {
    const Index k = idx[static_cast<std::size_t>(a)];
    const double pk = probs.first(k);
    for (Index b = 0; b < n; ++b) {
      const Index l = idx[static_cast<std::size_t>(b)];
      const double pkl = probs.joint(k, l);
      if (!(pkl > 0.0)) throw NumericalError("design does not admit this variance estimator");
      total += (pkl - pk * probs.first(l)) / pkl * d(a) * d(b) * residuals(a) * residuals(b);
    }
  }
  return total;
}

double srswor_variance_estimator(Index population_size, const Vector& residuals) {
  const Index n = residuals.size();
  if (n < 2) throw std::invalid_argument("closed-form SRSWOR variance needs n >= 2");
  const double N = static_cast<double>(population_size);
  const double f = static_cast<double>(n) / N;
  const double mean = residuals.mean();
  const double s2 = (residuals.array() - mean).square().sum() / static_cast<double>(n - 1);
  return N * N * (1.0 - f) * s2 / static_cast<double>(n);
}

double srswor_ht_variance(const Vector& population_values, Index sample_size) {
  const Index N = population_values.size();
  if (N < 2) throw std::invalid_argument("population needs at least 2 units");
  const double mean = population_values.mean();
  const double S2 = (population_values.array() - mean).square().sum() / static_cast<double>(N - 1);
  const double Nd = static_cast<double>(N);
  return Nd * Nd * (1.0 - static_cast<double>(sample_size) / Nd) * S2 /
         static_cast<double>(sample_size);
}

}  // namespace surveycalib
