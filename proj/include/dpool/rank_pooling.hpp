#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dpool {

/// Ordered per-frame feature vectors of one common dimension, stored flat.
class FeatureSequence {
 public:
  explicit FeatureSequence(std::size_t dim = 0) : dim_(dim) {}
  FeatureSequence(std::size_t dim, std::vector<double> flat);
  static FeatureSequence from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
  std::span<double> operator[](std::size_t t) { return {data_.data() + t * dim_, dim_}; }

  void push_back(std::span<const double> v);
  FeatureSequence reversed() const;
  /// Frames [first, first + count), 0-based.
  FeatureSequence window(std::size_t first, std::size_t count) const;

  const std::vector<double>& flat() const noexcept { return data_; }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

struct RankPoolParams {
  double lambda = 1.0;
  /// Passes over all frame pairs.
  int max_iters = 1000;
  /// Relative duality-gap target.
  double tol = 1e-6;
  /// Pool the running means of the features instead of the raw features.
  bool use_smoothing = true;

  void validate() const;
};

enum class Direction { forward, backward };

struct HierarchyConfig {
  int layers = 2;
  std::size_t window = 3;
  std::size_t stride = 1;
  Direction direction = Direction::forward;
  /// Apply RankPoolParams::use_smoothing in layers above the first as well.
  bool smooth_intermediate = true;

  void validate() const;
};

struct RankPoolResult {
  std::vector<double> weights;
  int iterations = 0;
  double primal = 0.0;
  double gap = 0.0;
};

/// Running mean: out[t] = (1/t) * sum of raw[1..t].
FeatureSequence smoothed_features(const FeatureSequence& raw);

/// (1/2)|w|^2 + lambda * sum_{i>j} max(0, 1 - w.(d_i - d_j)) on the sequence
/// exactly as given (no smoothing applied here).
double rank_pool_objective(const FeatureSequence& pooled, std::span<const double> w, double lambda);

/// Full solver report for the weights that order `features` in time.
RankPoolResult rank_pool_solve(const FeatureSequence& features, const RankPoolParams& params);

std::vector<double> rank_pool(const FeatureSequence& features, const RankPoolParams& params);

std::pair<std::vector<double>, std::vector<double>> rank_pool_bidirectional(const FeatureSequence& features,
                                                                            const RankPoolParams& params);

/// Output length of one rank-pooling layer.
std::size_t rank_pool_layer_length(std::size_t n, std::size_t window, std::size_t stride);

/// Pools every window [t, t + window - 1], t = 1, 1 + stride, ... Inputs
/// shorter than the window are pooled whole.
FeatureSequence rank_pool_layer(const FeatureSequence& input, std::size_t window, std::size_t stride,
                                const RankPoolParams& params, std::size_t jobs = 1);

std::vector<double> hierarchical_rank_pool(const FeatureSequence& features, const HierarchyConfig& config,
                                           const RankPoolParams& params, std::size_t jobs = 1);

}  // namespace dpool
