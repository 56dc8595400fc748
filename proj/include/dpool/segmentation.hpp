#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dpool/depth_io.hpp"

namespace dpool {

struct QomParams {
  /// Depth difference that counts a pixel as moved.
  int threshold_qom = 60;
  /// Share of the average action length sampled at each end of a segment.
  double tail_fraction = 0.125;
  /// Sliding window = floor(L / window_divisor).
  int window_divisor = 2;

  void validate() const;
};

/// 1-based inclusive frame span.
struct ActionSegment {
  std::size_t start = 1;
  std::size_t end = 1;
  std::optional<int> label;

  std::size_t length() const noexcept { return end - start + 1; }
  friend bool operator==(const ActionSegment&, const ActionSegment&) = default;
};

struct SegmentationModel {
  double avg_length = 1.0;
  double threshold_inter = 0.0;

  std::size_t window(const QomParams& params) const;
  void validate() const;
};

struct LabeledSequence {
  const DepthSequence* sequence = nullptr;
  std::vector<ActionSegment> segments;
};

/// Number of pixels of frame t (1-based) that differ from frame 1 by at
/// least `threshold_qom`.
std::uint64_t compute_qom(const DepthSequence& seq, std::size_t t, int threshold_qom);

/// compute_qom for every frame, in order.
std::vector<std::uint64_t> qom_profile(const DepthSequence& seq, int threshold_qom);

SegmentationModel fit_segmentation_model(std::span<const LabeledSequence> training, const QomParams& params);

/// Frames that survive the sliding-window refinement of a QOM profile,
/// 1-based and ascending. A candidate survives only if it is the minimum
/// (earliest on ties) of every window position that contains it.
std::vector<std::size_t> refine_boundaries(std::span<const std::uint64_t> qom, double threshold_inter,
                                           std::size_t window);

std::vector<ActionSegment> segment_actions(const DepthSequence& seq, const SegmentationModel& model,
                                           const QomParams& params);

/// Edit distance between the label strings of two segmentations, mapped to
/// 100 * (1 - d / max(len)). Unlabelled segments compare as one shared symbol.
double levenshtein_segmentation_score(std::span<const ActionSegment> pred, std::span<const ActionSegment> truth);

std::size_t levenshtein_distance(std::span<const int> a, std::span<const int> b);

// JSON array of {"start", "end", "label"}; label omitted when absent.
std::vector<ActionSegment> load_segments(const std::filesystem::path& path);
void save_segments(std::span<const ActionSegment> segments, const std::filesystem::path& path);

SegmentationModel load_segmentation_model(const std::filesystem::path& path);
void save_segmentation_model(const SegmentationModel& model, const std::filesystem::path& path);

}  // namespace dpool
