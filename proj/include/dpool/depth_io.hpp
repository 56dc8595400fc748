#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dpool {

/// One depth map. Samples are millimetres (or any dimensionless intensity
/// scaled into the u16 container); 0 means "no reading".
class DepthFrame {
 public:
  DepthFrame() = default;
  DepthFrame(std::size_t width, std::size_t height, std::vector<std::uint16_t> values);
  /// A frame filled with one value.
  DepthFrame(std::size_t width, std::size_t height, std::uint16_t fill);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return values_.size(); }

  std::uint16_t at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
  std::uint16_t& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }

  std::span<const std::uint16_t> values() const noexcept { return values_; }
  std::span<std::uint16_t> values() noexcept { return values_; }

  friend bool operator==(const DepthFrame&, const DepthFrame&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint16_t> values_;
};

class DepthSequence {
 public:
  DepthSequence() = default;
  DepthSequence(std::vector<DepthFrame> frames, double frame_rate = 30.0, std::string source_id = {});

  std::size_t size() const noexcept { return frames_.size(); }
  std::size_t width() const noexcept { return frames_.front().width(); }
  std::size_t height() const noexcept { return frames_.front().height(); }

  /// 0-based access.
  const DepthFrame& operator[](std::size_t i) const { return frames_[i]; }
  const std::vector<DepthFrame>& frames() const noexcept { return frames_; }

  double frame_rate() const noexcept { return frame_rate_; }
  const std::string& source_id() const noexcept { return source_id_; }

  /// Frames [first, last], 1-based inclusive.
  DepthSequence slice(std::size_t first, std::size_t last) const;
  DepthSequence reversed() const;

 private:
  std::vector<DepthFrame> frames_;
  double frame_rate_ = 30.0;
  std::string source_id_;
};

/// Real-valued image-shaped field, planar: all of channel 0, then channel 1...
struct Field {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> values;

  std::size_t plane_size() const noexcept { return width * height; }
};

/// 8-bit image, row-major with channels interleaved per pixel (PNG order).
struct DynamicImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  friend bool operator==(const DynamicImage&, const DynamicImage&) = default;
};

enum class SequenceFormat { png_dir, dseq };

/// Picks png_dir for directories and dseq for regular files.
SequenceFormat detect_format(const std::filesystem::path& path);

DepthSequence load_depth_sequence(const std::filesystem::path& path, SequenceFormat format);
DepthSequence load_depth_sequence(const std::filesystem::path& path);

/// png_dir writes frame_000001.png ... into `path` (created if missing).
void save_depth_sequence(const DepthSequence& seq, const std::filesystem::path& path,
                         SequenceFormat format);

/// Multiplies every sample by `scale` with rounding and u16 saturation.
DepthSequence rescale_depth(const DepthSequence& seq, double scale);

/// Joint min-max map of all channels to [0,255]; a constant field renders as
/// all-128.
DynamicImage quantize_field(const Field& field);

void save_dynamic_image(const DynamicImage& img, const std::filesystem::path& path);
DynamicImage load_dynamic_image(const std::filesystem::path& path);

}  // namespace dpool
