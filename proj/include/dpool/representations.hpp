#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dpool/depth_io.hpp"
#include "dpool/rank_pooling.hpp"

namespace dpool {

struct NormalField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> nx;
  std::vector<double> ny;
  std::vector<double> nz;
};

struct ForegroundMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<bool> mask;

  bool at(std::size_t x, std::size_t y) const { return mask[y * width + x]; }
  std::size_t count() const;
};

struct BackgroundParams {
  int hist_bins = 256;
  double tolerance = 50.0;
  double min_peak_mass = 0.01;

  void validate() const;
};

struct GmmParams {
  int components = 3;
  double learning_rate = 0.01;
  double mahalanobis_threshold = 6.25;
  double background_ratio = 0.7;
  double initial_variance = 225.0;
  double min_variance = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Forward/backward pooled weight fields before quantization.
struct PooledPair {
  Field forward;
  Field backward;
};

struct ImagePair {
  DynamicImage forward;
  DynamicImage backward;
};

struct DynamicImageSet {
  DynamicImage ddi_fwd, ddi_bwd;
  DynamicImage ddni_fwd, ddni_bwd;
  DynamicImage ddmni_fwd, ddmni_bwd;
};

/// Normals from central-difference depth gradients (one-sided at the border):
/// normalize(-dz/dx, -dz/dy, 1). Pixels that are 0 or touch a 0 4-neighbour
/// get (0,0,0).
NormalField compute_normals(const DepthFrame& frame);

/// Depth above which pixels are background, or nullopt when the histogram has
/// fewer than two qualifying peaks (nothing separable to remove).
std::optional<double> background_threshold(const DepthSequence& seq, const BackgroundParams& params);

DepthSequence remove_background(const DepthSequence& seq, const BackgroundParams& params);

/// Per-pixel online Gaussian mixture; one mask per frame, frame 1 is all-false.
std::vector<ForegroundMask> gmm_foreground(const DepthSequence& seq, const GmmParams& params, std::size_t jobs = 1);

/// Frame-major features: depth pixels (D = w*h).
FeatureSequence depth_features(const DepthSequence& seq);

/// Concatenated (Nx, Ny, Nz) planes per frame (D = 3*w*h); pixels outside
/// `masks` are zeroed when masks are given.
FeatureSequence normal_features(const DepthSequence& seq, const std::vector<ForegroundMask>* masks = nullptr);

/// Forward and backward hierarchical pooling of `features`, shaped as fields.
PooledPair pool_bidirectional(const FeatureSequence& features, std::size_t width, std::size_t height,
                              std::size_t channels, const HierarchyConfig& config, const RankPoolParams& params,
                              std::size_t jobs = 1);

PooledPair encode_ddi(const DepthSequence& segment, const HierarchyConfig& config, const RankPoolParams& params,
                      std::size_t jobs = 1);
PooledPair encode_ddni(const DepthSequence& segment, const BackgroundParams& bg, const HierarchyConfig& config,
                       const RankPoolParams& params, std::size_t jobs = 1);
PooledPair encode_ddmni(const DepthSequence& segment, const GmmParams& gmm, const HierarchyConfig& config,
                        const RankPoolParams& params, std::size_t jobs = 1);

ImagePair quantize_pair(const PooledPair& pooled);

ImagePair build_ddi(const DepthSequence& segment, const HierarchyConfig& config, const RankPoolParams& params,
                    std::size_t jobs = 1);
ImagePair build_ddni(const DepthSequence& segment, const BackgroundParams& bg, const HierarchyConfig& config,
                     const RankPoolParams& params, std::size_t jobs = 1);
ImagePair build_ddmni(const DepthSequence& segment, const GmmParams& gmm, const HierarchyConfig& config,
                      const RankPoolParams& params, std::size_t jobs = 1);

DynamicImageSet build_all(const DepthSequence& segment, const BackgroundParams& bg, const GmmParams& gmm,
                          const HierarchyConfig& config, const RankPoolParams& params, std::size_t jobs = 1);

}  // namespace dpool
