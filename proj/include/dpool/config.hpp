#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dpool/rank_pooling.hpp"
#include "dpool/representations.hpp"
#include "dpool/segmentation.hpp"

namespace dpool {

enum class Channel { ddi, ddni, ddmni };

std::string_view channel_name(Channel c);
/// Comma-separated subset of {ddi, ddni, ddmni}; canonical order, no repeats.
std::vector<Channel> parse_channels(std::string_view text);
std::string format_channels(const std::vector<Channel>& channels);

/// "ddi_fwd", "ddi_bwd", ... for the enabled channels, in fusion order.
std::vector<std::string> image_keys(const std::vector<Channel>& channels);

struct PipelineConfig {
  /// Applied to every loaded depth sample before processing.
  double depth_scale = 1.0;
  QomParams qom;
  BackgroundParams bg;
  GmmParams gmm;
  RankPoolParams pool;
  HierarchyConfig hierarchy;
  std::vector<Channel> channels{Channel::ddi, Channel::ddni, Channel::ddmni};
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  /// Side length of the nearest-centroid baseline's downsampled images.
  std::size_t baseline_size = 32;

  void validate() const;
  /// GMM parameters with the pipeline seed applied.
  GmmParams gmm_params() const;
};

/// key = value lines grouped in [sections]; unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::istream& in);
void dump_config(const PipelineConfig& config, std::ostream& out);

}  // namespace dpool
