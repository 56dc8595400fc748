#include "dpool/rank_pooling.hpp"

#include <algorithm>
#include <cmath>

#include "dpool/error.hpp"
#include "dpool/parallel.hpp"

namespace dpool {

FeatureSequence::FeatureSequence(std::size_t dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw Error(ErrorKind::DimensionMismatch, "flat feature buffer is not a whole number of vectors");
  }
}

FeatureSequence FeatureSequence::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return FeatureSequence();
  FeatureSequence seq(rows.front().size());
  for (const auto& r : rows) seq.push_back(r);
  return seq;
}

void FeatureSequence::push_back(std::span<const double> v) {
  if (dim_ == 0 && data_.empty()) dim_ = v.size();
  if (v.size() != dim_ || dim_ == 0) {
    throw Error(ErrorKind::DimensionMismatch, "feature vector of dimension " + std::to_string(v.size()) +
                                                  " in a sequence of dimension " + std::to_string(dim_));
  }
  data_.insert(data_.end(), v.begin(), v.end());
}

FeatureSequence FeatureSequence::reversed() const {
  FeatureSequence out(dim_);
  out.data_.reserve(data_.size());
  for (std::size_t t = size(); t-- > 0;) out.push_back((*this)[t]);
  return out;
}

FeatureSequence FeatureSequence::window(std::size_t first, std::size_t count) const {
  FeatureSequence out(dim_);
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * dim_);
  out.data_.assign(begin, begin + static_cast<std::ptrdiff_t>(count * dim_));
  return out;
}

void RankPoolParams::validate() const {
  if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be > 0");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
  if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
}

void HierarchyConfig::validate() const {
  if (layers < 1) throw Error(ErrorKind::InvalidArgument, "layers must be >= 1");
  if (window < 2) throw Error(ErrorKind::InvalidArgument, "window must be >= 2");
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
}

FeatureSequence smoothed_features(const FeatureSequence& raw) {
  FeatureSequence out = raw;
  // Incremental form keeps a constant sequence bit-identical to its input.
  for (std::size_t t = 1; t < out.size(); ++t) {
    auto prev = out[t - 1];
    auto cur = out[t];
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t d = 0; d < out.dim(); ++d) cur[d] = prev[d] + (cur[d] - prev[d]) * inv;
  }
  return out;
}

double rank_pool_objective(const FeatureSequence& pooled, std::span<const double> w, double lambda) {
  if (w.size() != pooled.dim()) throw Error(ErrorKind::DimensionMismatch, "weight dimension differs from features");
  double reg = 0.0;
  for (double x : w) reg += x * x;
  std::vector<double> scores(pooled.size(), 0.0);
  for (std::size_t t = 0; t < pooled.size(); ++t) {
    const auto v = pooled[t];
    for (std::size_t d = 0; d < w.size(); ++d) scores[t] += w[d] * v[d];
  }
  double hinge = 0.0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) hinge += std::max(0.0, 1.0 - (scores[i] - scores[j]));
  }
  return 0.5 * reg + lambda * hinge;
}

RankPoolResult rank_pool_solve(const FeatureSequence& features, const RankPoolParams& params) {
  params.validate();
  if (features.empty()) throw Error(ErrorKind::EmptyInput, "rank pooling needs at least one frame");
  for (double v : features.flat()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteFeature, "feature sequence contains a non-finite value");
  }
  const FeatureSequence seq = params.use_smoothing ? smoothed_features(features) : features;
  const std::size_t k = seq.size();
  const std::size_t dim = seq.dim();

  RankPoolResult result;
  result.weights.assign(dim, 0.0);
  if (k == 1) return result;

  // Pairwise differences are unchanged by a common shift, so work with
  // c_t = d_t - d_1. The solver only ever needs inner products between frames.
  std::vector<double> centred(seq.flat());
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t d = 0; d < dim; ++d) centred[t * dim + d] -= seq[0][d];
  }
  std::vector<double> gram(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += centred[a * dim + d] * centred[b * dim + d];
      gram[a * k + b] = dot;
      gram[b * k + a] = dot;
    }
  }

  struct Pair {
    std::size_t later;
    std::size_t earlier;
    double q;
  };
  std::vector<Pair> pairs;
  pairs.reserve(k * (k - 1) / 2);
  for (std::size_t i = 1; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      pairs.push_back({i, j, gram[i * k + i] + gram[j * k + j] - 2.0 * gram[i * k + j]});
    }
  }

  const double lambda = params.lambda;
  // A zero difference contributes a constant hinge of 1; its dual variable
  // sits at the bound and never moves w.
  std::vector<double> alpha(pairs.size(), 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].q <= 0.0) alpha[p] = lambda;
  }
  std::vector<double> beta(k, 0.0);
  std::vector<double> scores(k, 0.0);

  for (int epoch = 1; epoch <= params.max_iters; ++epoch) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const Pair& pr = pairs[p];
      if (pr.q <= 0.0) continue;
      const double grad = scores[pr.later] - scores[pr.earlier] - 1.0;
      const double next = std::clamp(alpha[p] - grad / pr.q, 0.0, lambda);
      const double delta = next - alpha[p];
      if (delta == 0.0) continue;
      alpha[p] = next;
      beta[pr.later] += delta;
      beta[pr.earlier] -= delta;
      for (std::size_t t = 0; t < k; ++t) {
        scores[t] += delta * (gram[pr.later * k + t] - gram[pr.earlier * k + t]);
      }
    }

    // Fresh scores so the gap is not polluted by accumulated updates.
    for (std::size_t t = 0; t < k; ++t) {
      double s = 0.0;
      for (std::size_t u = 0; u < k; ++u) s += gram[t * k + u] * beta[u];
      scores[t] = s;
    }
    double quad = 0.0;
    for (std::size_t t = 0; t < k; ++t) quad += beta[t] * scores[t];
    double hinge = 0.0;
    double alpha_sum = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      hinge += std::max(0.0, 1.0 - (scores[pairs[p].later] - scores[pairs[p].earlier]));
      alpha_sum += alpha[p];
    }
    result.primal = 0.5 * quad + lambda * hinge;
    result.gap = result.primal - (alpha_sum - 0.5 * quad);
    result.iterations = epoch;
    if (result.gap <= params.tol * std::max(1.0, result.primal)) break;
  }

  for (std::size_t t = 0; t < k; ++t) {
    if (beta[t] == 0.0) continue;
    for (std::size_t d = 0; d < dim; ++d) result.weights[d] += beta[t] * centred[t * dim + d];
  }
  return result;
}

std::vector<double> rank_pool(const FeatureSequence& features, const RankPoolParams& params) {
  return rank_pool_solve(features, params).weights;
}

std::pair<std::vector<double>, std::vector<double>> rank_pool_bidirectional(const FeatureSequence& features,
                                                                            const RankPoolParams& params) {
  return {rank_pool(features, params), rank_pool(features.reversed(), params)};
}

std::size_t rank_pool_layer_length(std::size_t n, std::size_t window, std::size_t stride) {
  if (n < window) return 1;
  return (n - window) / stride + 1;
}

FeatureSequence rank_pool_layer(const FeatureSequence& input, std::size_t window, std::size_t stride,
                                const RankPoolParams& params, std::size_t jobs) {
  if (input.empty()) throw Error(ErrorKind::EmptyInput, "rank pooling layer needs at least one frame");
  if (window < 1 || stride < 1) throw Error(ErrorKind::InvalidArgument, "window and stride must be >= 1");
  const std::size_t n = input.size();
  const std::size_t count = rank_pool_layer_length(n, window, stride);
  const std::size_t span = std::min(window, n);

  std::vector<std::vector<double>> pooled(count);
  parallel_for(count, jobs, [&](std::size_t w) { pooled[w] = rank_pool(input.window(w * stride, span), params); });

  FeatureSequence out(input.dim());
  for (const auto& v : pooled) out.push_back(v);
  return out;
}

std::vector<double> hierarchical_rank_pool(const FeatureSequence& features, const HierarchyConfig& config,
                                           const RankPoolParams& params, std::size_t jobs) {
  config.validate();
  FeatureSequence seq = config.direction == Direction::backward ? features.reversed() : features;
  RankPoolParams upper = params;
  if (!config.smooth_intermediate) upper.use_smoothing = false;
  for (int layer = 1; layer < config.layers; ++layer) {
    seq = rank_pool_layer(seq, config.window, config.stride, layer == 1 ? params : upper, jobs);
  }
  return rank_pool(seq, config.layers == 1 ? params : upper);
}

}  // namespace dpool
