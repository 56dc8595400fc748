#include "dpool/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "dpool/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dpool {

namespace {

DepthFrame render(const SceneOptions& scene, long block_x, long block_y, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> noise(-scene.noise, scene.noise);
  DepthFrame frame(scene.width, scene.height, scene.wall_depth);
  for (std::size_t y = 0; y < scene.height; ++y) {
    for (std::size_t x = 0; x < scene.width; ++x) {
      const auto sx = static_cast<long>(x);
      const auto sy = static_cast<long>(y);
      const bool hand = sx >= block_x && sx < block_x + static_cast<long>(scene.block) && sy >= block_y &&
                        sy < block_y + static_cast<long>(scene.block);
      const int base = hand ? scene.hand_depth : scene.wall_depth;
      const int n = scene.noise > 0 ? noise(rng) : 0;
      frame.at(x, y) = static_cast<std::uint16_t>(std::clamp(base + n, 1, 65535));
    }
  }
  return frame;
}

}  // namespace

SyntheticStream make_gesture_stream(const std::vector<GestureSpec>& gestures, const SceneOptions& scene,
                                    std::uint64_t seed, const std::string& source_id) {
  if (gestures.empty()) throw Error(ErrorKind::InvalidArgument, "a gesture stream needs at least one gesture");
  std::mt19937_64 rng(seed);
  const long rest_x = static_cast<long>(scene.width / 2) - static_cast<long>(scene.block / 2);
  const long rest_y = static_cast<long>(scene.height / 2) - static_cast<long>(scene.block / 2);

  std::vector<DepthFrame> frames;
  frames.push_back(render(scene, rest_x, rest_y, rng));
  std::vector<ActionSegment> truth;
  for (const auto& g : gestures) {
    if (g.length < 2) throw Error(ErrorKind::InvalidArgument, "gestures need at least two frames");
    const std::size_t start = frames.size();
    for (std::size_t tau = 1; tau <= g.length; ++tau) {
      const double phase = std::numbers::pi * static_cast<double>(tau) / static_cast<double>(g.length);
      const long d = std::lround(g.amplitude * std::sin(phase));
      long dx = 0;
      long dy = 0;
      switch (g.label % 4) {
        case 0: dx = d; break;
        case 1: dy = d; break;
        case 2: dx = -d; break;
        default: dy = -d; break;
      }
      frames.push_back(render(scene, rest_x + dx, rest_y + dy, rng));
    }
    truth.push_back({start, frames.size(), g.label});
  }
  return {DepthSequence(std::move(frames), 30.0, source_id), std::move(truth)};
}

std::vector<GestureSpec> random_gestures(std::size_t count, int classes, std::size_t min_length,
                                         std::size_t max_length, int fixed_label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> length(min_length, max_length);
  std::uniform_int_distribution<int> amplitude(8, 12);
  std::uniform_int_distribution<int> label(0, std::max(classes, 1) - 1);
  std::vector<GestureSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    GestureSpec g;
    g.length = length(rng);
    g.amplitude = amplitude(rng);
    g.label = fixed_label >= 0 ? fixed_label : label(rng);
    out.push_back(g);
  }
  return out;
}

std::vector<DatasetItem> make_gesture_dataset(int classes, std::size_t per_class, std::size_t gestures_per_stream,
                                              const SceneOptions& scene, std::uint64_t seed) {
  std::vector<DatasetItem> items;
  for (int c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(c) * 1009ULL + i;
      char name[64];
      std::snprintf(name, sizeof name, "gesture_c%d_%02zu", c, i);
      DatasetItem item;
      item.stream = make_gesture_stream(random_gestures(gestures_per_stream, classes, 16, 28, c, s), scene, s, name);
      item.label = c;
      item.train = i < per_class / 2;
      items.push_back(std::move(item));
    }
  }
  return items;
}

void write_gesture_dataset(const std::vector<DatasetItem>& items, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string());
  json index = json::array();
  for (const auto& item : items) {
    const std::string id = item.stream.sequence.source_id();
    save_depth_sequence(item.stream.sequence, dir / (id + ".dseq"), SequenceFormat::dseq);
    save_segments(item.stream.truth, dir / (id + ".segments.json"));
    index.push_back({{"source_id", id},
                     {"label", item.label},
                     {"split", item.train ? "train" : "test"},
                     {"frames", item.stream.sequence.size()}});
  }
  std::ofstream out(dir / "dataset.json");
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write dataset index");
  out << index.dump(2) << '\n';
}

}  // namespace dpool
