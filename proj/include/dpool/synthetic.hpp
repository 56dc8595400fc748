#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpool/depth_io.hpp"
#include "dpool/segmentation.hpp"

namespace dpool {

// Programmatic depth streams: a flat wall with a square "hand" block that
// swipes out from a rest position and back. Every gesture starts and ends in
// the rest pose, so QOM drops to zero exactly at the true boundaries.

struct SceneOptions {
  std::size_t width = 32;
  std::size_t height = 32;
  std::uint16_t wall_depth = 2000;
  std::uint16_t hand_depth = 1200;
  std::size_t block = 6;
  /// Uniform integer sensor noise in [-noise, noise], redrawn every frame.
  /// Even +-1 drowns the hand in raw-depth DDIs, so it is off by default.
  int noise = 0;
};

/// Class ids: 0 swipe right, 1 swipe down, 2 swipe left, 3 swipe up.
struct GestureSpec {
  int label = 0;
  /// Frames from one rest pose to the next.
  std::size_t length = 20;
  int amplitude = 10;
};

struct SyntheticStream {
  DepthSequence sequence;
  /// Gesture spans sharing their rest-pose boundary frames.
  std::vector<ActionSegment> truth;
};

SyntheticStream make_gesture_stream(const std::vector<GestureSpec>& gestures, const SceneOptions& scene,
                                    std::uint64_t seed, const std::string& source_id);

/// Random gesture list: lengths in [min_length, max_length], amplitudes in
/// [8, 12], labels drawn from [0, classes) unless `fixed_label` >= 0.
std::vector<GestureSpec> random_gestures(std::size_t count, int classes, std::size_t min_length,
                                         std::size_t max_length, int fixed_label, std::uint64_t seed);

struct DatasetItem {
  SyntheticStream stream;
  int label = 0;
  bool train = false;
};

/// `classes` x `per_class` streams, each holding `gestures_per_stream`
/// gestures of its class. The first half of each class is the training split.
std::vector<DatasetItem> make_gesture_dataset(int classes, std::size_t per_class, std::size_t gestures_per_stream,
                                              const SceneOptions& scene, std::uint64_t seed);

/// Writes <source_id>.dseq, <source_id>.segments.json and dataset.json.
void write_gesture_dataset(const std::vector<DatasetItem>& items, const std::filesystem::path& dir);

}  // namespace dpool
