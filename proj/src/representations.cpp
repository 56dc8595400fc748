#include "dpool/representations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dpool/error.hpp"
#include "dpool/parallel.hpp"

namespace dpool {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Gaussian {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

}  // namespace

std::size_t ForegroundMask::count() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)); }

void BackgroundParams::validate() const {
  if (hist_bins < 8) throw Error(ErrorKind::InvalidArgument, "hist_bins must be >= 8");
  if (!(tolerance >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be >= 0");
  if (!(min_peak_mass > 0.0 && min_peak_mass < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "min_peak_mass must lie in (0, 1)");
  }
}

void GmmParams::validate() const {
  if (components < 1) throw Error(ErrorKind::InvalidArgument, "components must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "learning_rate must lie in (0, 1]");
  }
  if (!(mahalanobis_threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "mahalanobis_threshold must be > 0");
  if (!(background_ratio > 0.0 && background_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "background_ratio must lie in (0, 1]");
  }
  if (!(min_variance > 0.0) || !(initial_variance >= min_variance)) {
    throw Error(ErrorKind::InvalidArgument, "variances must satisfy 0 < min_variance <= initial_variance");
  }
}

NormalField compute_normals(const DepthFrame& frame) {
  const std::size_t w = frame.width();
  const std::size_t h = frame.height();
  NormalField out{w, h, std::vector<double>(w * h, 0.0), std::vector<double>(w * h, 0.0),
                  std::vector<double>(w * h, 0.0)};
  auto z = [&](std::size_t x, std::size_t y) { return static_cast<double>(frame.at(x, y)); };

  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (frame.at(x, y) == 0) continue;
      if ((x > 0 && frame.at(x - 1, y) == 0) || (x + 1 < w && frame.at(x + 1, y) == 0) ||
          (y > 0 && frame.at(x, y - 1) == 0) || (y + 1 < h && frame.at(x, y + 1) == 0)) {
        continue;
      }
      double dzdx;
      if (x == 0) {
        dzdx = z(1, y) - z(0, y);
      } else if (x + 1 == w) {
        dzdx = z(x, y) - z(x - 1, y);
      } else {
        dzdx = 0.5 * (z(x + 1, y) - z(x - 1, y));
      }
      double dzdy;
      if (y == 0) {
        dzdy = z(x, 1) - z(x, 0);
      } else if (y + 1 == h) {
        dzdy = z(x, y) - z(x, y - 1);
      } else {
        dzdy = 0.5 * (z(x, y + 1) - z(x, y - 1));
      }
      const double norm = std::sqrt(dzdx * dzdx + dzdy * dzdy + 1.0);
      const std::size_t i = y * w + x;
      out.nx[i] = -dzdx / norm;
      out.ny[i] = -dzdy / norm;
      out.nz[i] = 1.0 / norm;
    }
  }
  return out;
}

std::optional<double> background_threshold(const DepthSequence& seq, const BackgroundParams& params) {
  params.validate();
  std::uint16_t lo = 0xffff;
  std::uint16_t hi = 0;
  std::size_t total = 0;
  for (const auto& frame : seq.frames()) {
    for (std::uint16_t v : frame.values()) {
      if (v == 0) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++total;
    }
  }
  if (total == 0) return std::nullopt;

  const auto bins = static_cast<std::size_t>(params.hist_bins);
  const double bin_width = (static_cast<double>(hi) + 1.0 - lo) / static_cast<double>(bins);
  std::vector<std::size_t> hist(bins, 0);
  for (const auto& frame : seq.frames()) {
    for (std::uint16_t v : frame.values()) {
      if (v == 0) continue;
      auto b = static_cast<std::size_t>((v - lo) / bin_width);
      hist[std::min(b, bins - 1)] += 1;
    }
  }

  // A plateau counts once, at its far end.
  const double min_mass = params.min_peak_mass * static_cast<double>(total);
  std::vector<std::size_t> peaks;
  for (std::size_t b = 0; b < bins; ++b) {
    if (hist[b] == 0 || static_cast<double>(hist[b]) < min_mass) continue;
    if (b > 0 && hist[b] < hist[b - 1]) continue;
    if (b + 1 < bins && hist[b] <= hist[b + 1]) continue;
    peaks.push_back(b);
  }
  if (peaks.size() < 2) return std::nullopt;
  return lo + bin_width * static_cast<double>(peaks.back()) - params.tolerance;
}

DepthSequence remove_background(const DepthSequence& seq, const BackgroundParams& params) {
  const auto threshold = background_threshold(seq, params);
  std::vector<DepthFrame> frames = seq.frames();
  bool any_left = false;
  for (auto& frame : frames) {
    for (auto& v : frame.values()) {
      if (threshold && static_cast<double>(v) > *threshold) v = 0;
      any_left = any_left || v != 0;
    }
  }
  if (!any_left) throw Error(ErrorKind::NoForeground, "background removal left no depth samples");
  return DepthSequence(std::move(frames), seq.frame_rate(), seq.source_id());
}

std::vector<ForegroundMask> gmm_foreground(const DepthSequence& seq, const GmmParams& params, std::size_t jobs) {
  params.validate();
  if (seq.size() < 2) throw Error(ErrorKind::TooFewFrames, "GMM foreground needs at least two frames");
  const std::size_t w = seq.width();
  const std::size_t h = seq.height();
  const std::size_t pixels = w * h;
  const auto k = static_cast<std::size_t>(params.components);
  const double alpha = params.learning_rate;

  std::vector<ForegroundMask> masks(seq.size(), ForegroundMask{w, h, std::vector<bool>(pixels, false)});
  // std::vector<bool> packs bits, so each worker writes to its own buffer.
  std::vector<std::vector<std::uint8_t>> fg(seq.size(), std::vector<std::uint8_t>(pixels, 0));

  const auto first = seq[0].values();
  const auto [lo_it, hi_it] = std::minmax_element(first.begin(), first.end());
  std::uniform_real_distribution<double> spare_mean(static_cast<double>(*lo_it), static_cast<double>(*hi_it));

  parallel_for(pixels, jobs, [&](std::size_t p) {
    // Spare components start at seeded random means with zero weight; the
    // per-pixel stream keeps the result independent of scheduling.
    std::mt19937_64 rng(splitmix64(params.seed ^ splitmix64(p)));
    auto draw_mean = spare_mean;
    std::vector<Gaussian> mix(k);
    for (auto& g : mix) g = {0.0, draw_mean(rng), params.initial_variance};
    if (first[p] != 0) mix[0] = {1.0, static_cast<double>(first[p]), params.initial_variance};

    std::vector<std::size_t> order(k);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const std::uint16_t raw = seq[t].values()[p];
      if (raw == 0) continue;
      const double x = raw;

      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mix[a].weight / std::sqrt(mix[a].variance) > mix[b].weight / std::sqrt(mix[b].variance);
      });
      // Background = highest-ranked components up to and including the one
      // whose cumulative weight first exceeds the ratio.
      std::size_t background_count = 0;
      double cumulative = 0.0;
      while (background_count < k) {
        cumulative += mix[order[background_count]].weight;
        ++background_count;
        if (cumulative > params.background_ratio) break;
      }

      std::size_t rank = k;
      for (std::size_t r = 0; r < k; ++r) {
        const Gaussian& g = mix[order[r]];
        const double d = x - g.mean;
        if (d * d <= params.mahalanobis_threshold * g.variance) {
          rank = r;
          break;
        }
      }
      fg[t][p] = (rank == k || rank >= background_count) ? 1 : 0;

      for (auto& g : mix) g.weight *= 1.0 - alpha;
      if (rank < k) {
        Gaussian& g = mix[order[rank]];
        g.weight += alpha;
        g.mean += alpha * (x - g.mean);
        const double d = x - g.mean;
        g.variance = std::max(params.min_variance, (1.0 - alpha) * g.variance + alpha * d * d);
      } else {
        mix[order[k - 1]] = {alpha, x, params.initial_variance};
      }
      double sum = 0.0;
      for (const auto& g : mix) sum += g.weight;
      if (sum > 0.0) {
        for (auto& g : mix) g.weight /= sum;
      }
    }
  });

  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (std::size_t p = 0; p < pixels; ++p) masks[t].mask[p] = fg[t][p] != 0;
  }
  return masks;
}

FeatureSequence depth_features(const DepthSequence& seq) {
  FeatureSequence out(seq.width() * seq.height());
  std::vector<double> row(out.dim());
  for (const auto& frame : seq.frames()) {
    const auto v = frame.values();
    std::copy(v.begin(), v.end(), row.begin());
    out.push_back(row);
  }
  return out;
}

FeatureSequence normal_features(const DepthSequence& seq, const std::vector<ForegroundMask>* masks) {
  const std::size_t plane = seq.width() * seq.height();
  if (masks != nullptr && masks->size() != seq.size()) {
    throw Error(ErrorKind::LengthMismatch, "one foreground mask per frame is required");
  }
  FeatureSequence out(3 * plane);
  std::vector<double> row(3 * plane);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const NormalField n = compute_normals(seq[t]);
    std::copy(n.nx.begin(), n.nx.end(), row.begin());
    std::copy(n.ny.begin(), n.ny.end(), row.begin() + static_cast<std::ptrdiff_t>(plane));
    std::copy(n.nz.begin(), n.nz.end(), row.begin() + static_cast<std::ptrdiff_t>(2 * plane));
    if (masks != nullptr) {
      const auto& m = (*masks)[t].mask;
      for (std::size_t i = 0; i < plane; ++i) {
        if (m[i]) continue;
        row[i] = row[plane + i] = row[2 * plane + i] = 0.0;
      }
    }
    out.push_back(row);
  }
  return out;
}

PooledPair pool_bidirectional(const FeatureSequence& features, std::size_t width, std::size_t height,
                              std::size_t channels, const HierarchyConfig& config, const RankPoolParams& params,
                              std::size_t jobs) {
  if (features.dim() != width * height * channels) {
    throw Error(ErrorKind::DimensionMismatch, "feature dimension does not match the image shape");
  }
  HierarchyConfig fwd = config;
  fwd.direction = Direction::forward;
  HierarchyConfig bwd = config;
  bwd.direction = Direction::backward;
  return {Field{width, height, channels, hierarchical_rank_pool(features, fwd, params, jobs)},
          Field{width, height, channels, hierarchical_rank_pool(features, bwd, params, jobs)}};
}

PooledPair encode_ddi(const DepthSequence& segment, const HierarchyConfig& config, const RankPoolParams& params,
                      std::size_t jobs) {
  return pool_bidirectional(depth_features(segment), segment.width(), segment.height(), 1, config, params, jobs);
}

PooledPair encode_ddni(const DepthSequence& segment, const BackgroundParams& bg, const HierarchyConfig& config,
                       const RankPoolParams& params, std::size_t jobs) {
  const DepthSequence cleaned = remove_background(segment, bg);
  return pool_bidirectional(normal_features(cleaned), segment.width(), segment.height(), 3, config, params, jobs);
}

PooledPair encode_ddmni(const DepthSequence& segment, const GmmParams& gmm, const HierarchyConfig& config,
                        const RankPoolParams& params, std::size_t jobs) {
  const auto masks = gmm_foreground(segment, gmm, jobs);
  return pool_bidirectional(normal_features(segment, &masks), segment.width(), segment.height(), 3, config, params,
                            jobs);
}

ImagePair quantize_pair(const PooledPair& pooled) {
  return {quantize_field(pooled.forward), quantize_field(pooled.backward)};
}

ImagePair build_ddi(const DepthSequence& segment, const HierarchyConfig& config, const RankPoolParams& params,
                    std::size_t jobs) {
  return quantize_pair(encode_ddi(segment, config, params, jobs));
}

ImagePair build_ddni(const DepthSequence& segment, const BackgroundParams& bg, const HierarchyConfig& config,
                     const RankPoolParams& params, std::size_t jobs) {
  return quantize_pair(encode_ddni(segment, bg, config, params, jobs));
}

ImagePair build_ddmni(const DepthSequence& segment, const GmmParams& gmm, const HierarchyConfig& config,
                      const RankPoolParams& params, std::size_t jobs) {
  return quantize_pair(encode_ddmni(segment, gmm, config, params, jobs));
}

DynamicImageSet build_all(const DepthSequence& segment, const BackgroundParams& bg, const GmmParams& gmm,
                          const HierarchyConfig& config, const RankPoolParams& params, std::size_t jobs) {
  auto ddi = build_ddi(segment, config, params, jobs);
  auto ddni = build_ddni(segment, bg, config, params, jobs);
  auto ddmni = build_ddmni(segment, gmm, config, params, jobs);
  return {std::move(ddi.forward),  std::move(ddi.backward),   std::move(ddni.forward),
          std::move(ddni.backward), std::move(ddmni.forward), std::move(ddmni.backward)};
}

}  // namespace dpool
