#pragma once

#include "surveycalib/core.hpp"

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

namespace surveycalib {

/// Counter-based generator: output i of stream (seed, stream_id) is
/// mix64(key + (i + 1) * golden) where key = mix64(seed ^ mix64(stream_id))
/// and mix64 is the SplitMix64 finalizer. Any output can be computed
/// without the ones before it, so replicate streams need no shared state.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next();
  /// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller (both outputs are used).
  double normal();

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

enum class DesignKind { Srswor };

struct DesignSpec {
  DesignKind kind = DesignKind::Srswor;
  Index sample_size = 0;
  Index population_size = 0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument unless 1 <= n <= N.
  void validate() const;
};

/// First- and second-order inclusion probabilities of a fixed-size design.
class InclusionProbs {
 public:
  virtual ~InclusionProbs() = default;
  virtual Index population_size() const = 0;
  virtual Index sample_size() const = 0;
  /// pi_k
  virtual double first(Index k) const = 0;
  /// pi_kl, with joint(k, k) == first(k)
  virtual double joint(Index k, Index l) const = 0;

  Vector first_order() const;
  Matrix second_order() const;
};

class SrsworInclusion final : public InclusionProbs {
 public:
  SrsworInclusion(Index population_size, Index sample_size);

  Index population_size() const override { return N_; }
  Index sample_size() const override { return n_; }
  double first(Index) const override;
  double joint(Index k, Index l) const override;

 private:
  Index N_;
  Index n_;
};

std::unique_ptr<InclusionProbs> inclusion_probs(const DesignSpec& spec);

/// SRSWOR draw for replicate `replicate_id` (partial Fisher-Yates over the
/// index array, stream keyed by (spec.seed, replicate_id)). Weights are N/n.
SampleData draw_sample(const PopulationFrame& frame, const DesignSpec& spec,
                       std::uint64_t replicate_id);

/// Sorted 0-based indices of an SRSWOR draw, without touching any frame.
std::vector<Index> draw_indices(Index population_size, Index sample_size, std::uint64_t seed,
                                std::uint64_t replicate_id);

/// sum_s d_k * values_k
double ht_total(const SampleData& sample, const Vector& values);
Vector ht_total(const SampleData& sample, const Matrix& values);

/// Every size-n subset with its probability 1 / C(N, n), in lexicographic
/// order. Refuses when C(N, n) > 1e6.
std::vector<std::pair<SampleData, double>> enumerate_all_samples(const PopulationFrame& frame,
                                                                 const DesignSpec& spec);

/// Number of size-n subsets of N units, saturating at UINT64_MAX.
std::uint64_t binomial(Index N, Index n);

/// Horvitz-Thompson variance estimator for the residuals e_k:
/// sum_k sum_l (pi_kl - pi_k pi_l) / pi_kl * d_k d_l e_k e_l over the sample.
double ht_variance_estimator(const SampleData& sample, const InclusionProbs& probs,
                             const Vector& residuals);

/// Closed form of the same estimator under SRSWOR: N^2 (1 - n/N) s_e^2 / n.
double srswor_variance_estimator(Index population_size, const Vector& residuals);

/// True design variance of the HT total estimator under SRSWOR:
/// N^2 (1 - n/N) S_y^2 / n with S_y^2 the population variance (divisor N - 1).
double srswor_ht_variance(const Vector& population_values, Index sample_size);

}  // namespace surveycalib
