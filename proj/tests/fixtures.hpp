#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dpool/depth_io.hpp"
#include "dpool/representations.hpp"

namespace fixture {

/// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() / ("dpool_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline dpool::DepthSequence constant_sequence(std::size_t frames, std::size_t w, std::size_t h, std::uint16_t v) {
  return dpool::DepthSequence(std::vector<dpool::DepthFrame>(frames, dpool::DepthFrame(w, h, v)));
}

struct MovingBlock {
  dpool::DepthSequence sequence;
  /// Pixels covered by the block in each frame (ground-truth foreground).
  std::vector<std::vector<bool>> truth;
};

/// Wall with mild noise; a block sits off-screen for `static_frames` frames,
/// then enters and moves one pixel per frame to the right.
inline MovingBlock moving_block(std::size_t w, std::size_t h, std::size_t block, std::size_t static_frames,
                                std::size_t moving_frames, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(-2, 2);
  MovingBlock out;
  std::vector<dpool::DepthFrame> frames;
  const std::size_t y0 = (h - block) / 2;
  for (std::size_t t = 0; t < static_frames + moving_frames; ++t) {
    dpool::DepthFrame f(w, h, std::uint16_t{2000});
    std::vector<bool> mask(w * h, false);
    const bool present = t >= static_frames;
    const std::size_t x0 = present ? 2 + (t - static_frames) : 0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const bool in = present && x >= x0 && x < x0 + block && y >= y0 && y < y0 + block;
        f.at(x, y) = static_cast<std::uint16_t>((in ? 1200 : 2000) + noise(rng));
        mask[y * w + x] = in;
      }
    }
    frames.push_back(std::move(f));
    out.truth.push_back(std::move(mask));
  }
  out.sequence = dpool::DepthSequence(std::move(frames));
  return out;
}

/// A plane z = base + slope_t * (x - cx) on a central square, far wall around
/// it. slope_t grows linearly from 0 to `max_slope`, so the plane tilts about
/// the y axis.
inline dpool::DepthSequence tilting_plane(std::size_t frames, double max_slope, bool tilt_about_y = true) {
  const std::size_t n = 24;
  std::vector<dpool::DepthFrame> out;
  for (std::size_t t = 0; t < frames; ++t) {
    const double slope = frames == 1 ? 0.0 : max_slope * static_cast<double>(t) / static_cast<double>(frames - 1);
    dpool::DepthFrame f(n, n, std::uint16_t{3000});
    for (std::size_t y = 4; y < 20; ++y) {
      for (std::size_t x = 4; x < 20; ++x) {
        const double u = tilt_about_y ? static_cast<double>(x) - 12.0 : static_cast<double>(y) - 12.0;
        f.at(x, y) = static_cast<std::uint16_t>(std::lround(1000.0 + slope * u));
      }
    }
    out.push_back(std::move(f));
  }
  return dpool::DepthSequence(std::move(out));
}

inline double iou(const std::vector<bool>& a, const std::vector<bool>& b) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Sum of |v| per plane of a planar field.
inline std::vector<double> plane_energy(const dpool::Field& f) {
  std::vector<double> e(f.channels, 0.0);
  for (std::size_t c = 0; c < f.channels; ++c) {
    for (std::size_t i = 0; i < f.plane_size(); ++i) e[c] += std::abs(f.values[c * f.plane_size() + i]);
  }
  return e;
}

}  // namespace fixture
