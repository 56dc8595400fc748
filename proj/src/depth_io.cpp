#include "dpool/depth_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <map>
#include <regex>

#include "dpool/error.hpp"

namespace fs = std::filesystem;

namespace dpool {

namespace {

// Raw PNG pixels as stored in the file: rows packed, 16-bit samples big-endian.
struct PngData {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  std::string error;
};

std::size_t row_bytes(const PngData& d) {
  return static_cast<std::size_t>(d.width) * d.channels * (d.bit_depth / 8);
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* data = static_cast<PngData*>(png_get_error_ptr(png));
  data->error = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

// libpng reports failures through longjmp; everything touched after setjmp
// lives in `data`, which is owned by the caller.
bool read_png(std::FILE* file, PngData& data) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &data, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  int color_type = 0;
  int interlace = 0;
  png_get_IHDR(png, info, &data.width, &data.height, &data.bit_depth, &color_type, &interlace, nullptr,
               nullptr);
  if (color_type == PNG_COLOR_TYPE_GRAY) {
    data.channels = 1;
  } else if (color_type == PNG_COLOR_TYPE_RGB) {
    data.channels = 3;
  } else {
    data.error = "unsupported PNG color type";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (data.bit_depth != 8 && data.bit_depth != 16) {
    data.error = "unsupported PNG bit depth";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  data.bytes.resize(row_bytes(data) * data.height);
  data.rows.resize(data.height);
  for (png_uint_32 y = 0; y < data.height; ++y) data.rows[y] = data.bytes.data() + y * row_bytes(data);
  png_read_image(png, data.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool write_png(std::FILE* file, PngData& data) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &data, png_error_fn, png_warning_fn);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, data.width, data.height, data.bit_depth,
               data.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  data.rows.resize(data.height);
  for (png_uint_32 y = 0; y < data.height; ++y) data.rows[y] = data.bytes.data() + y * row_bytes(data);
  png_write_image(png, data.rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

PngData read_png_file(const fs::path& path, ErrorKind on_failure) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorKind::MissingPath, "cannot open " + path.string());
  PngData data;
  if (!read_png(file.get(), data)) {
    throw Error(on_failure, "cannot decode " + path.string() + (data.error.empty() ? "" : ": " + data.error));
  }
  return data;
}

void write_png_file(const fs::path& path, PngData& data) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  if (!write_png(file.get(), data)) {
    throw Error(ErrorKind::IoFailure, "cannot encode " + path.string() + ": " + data.error);
  }
  if (std::fflush(file.get()) != 0) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
}

constexpr char kDseqMagic[4] = {'D', 'S', 'E', 'Q'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

DepthSequence load_dseq(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingPath, "cannot open " + path.string());
  unsigned char header[16];
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw Error(ErrorKind::CorruptFrame, "truncated DSEQ header in " + path.string());
  }
  if (!std::equal(header, header + 4, kDseqMagic)) {
    throw Error(ErrorKind::CorruptFrame, "bad DSEQ magic in " + path.string());
  }
  const std::uint32_t width = get_u32(header + 4);
  const std::uint32_t height = get_u32(header + 8);
  const std::uint32_t count = get_u32(header + 12);
  if (count == 0) throw Error(ErrorKind::EmptySequence, path.string() + " holds no frames");
  if (width < 2 || height < 2) throw Error(ErrorKind::CorruptFrame, "DSEQ frame smaller than 2x2");

  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  std::error_code ec;
  const auto file_size = fs::file_size(path, ec);
  if (ec || file_size != 16 + 2 * pixels * count) {
    throw Error(ErrorKind::CorruptFrame, "DSEQ payload size does not match header in " + path.string());
  }

  std::vector<DepthFrame> frames;
  frames.reserve(count);
  std::vector<unsigned char> buf(2 * pixels);
  for (std::uint32_t f = 0; f < count; ++f) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw Error(ErrorKind::CorruptFrame, "truncated DSEQ payload in " + path.string());
    }
    std::vector<std::uint16_t> values(pixels);
    for (std::size_t i = 0; i < pixels; ++i) {
      values[i] = static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8));
    }
    frames.emplace_back(width, height, std::move(values));
  }
  return DepthSequence(std::move(frames), 30.0, path.stem().string());
}

DepthSequence load_png_dir(const fs::path& dir) {
  static const std::regex pattern(R"(frame_(\d{6})\.png)");
  std::map<long, fs::path> indexed;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (std::regex_match(name, m, pattern)) indexed.emplace(std::stol(m[1].str()), entry.path());
  }
  if (indexed.empty()) throw Error(ErrorKind::EmptySequence, "no frame_%06d.png files in " + dir.string());

  std::vector<DepthFrame> frames;
  frames.reserve(indexed.size());
  long expected = 1;
  for (const auto& [index, path] : indexed) {
    if (index != expected) {
      throw Error(ErrorKind::CorruptFrame, "frame numbering gap before " + path.filename().string());
    }
    ++expected;
    PngData data = read_png_file(path, ErrorKind::CorruptFrame);
    if (data.channels != 1 || data.bit_depth != 16) {
      throw Error(ErrorKind::CorruptFrame, path.string() + " is not a 16-bit grayscale PNG");
    }
    if (data.width < 2 || data.height < 2) {
      throw Error(ErrorKind::CorruptFrame, path.string() + " is smaller than 2x2");
    }
    if (!frames.empty() && (data.width != frames.front().width() || data.height != frames.front().height())) {
      throw Error(ErrorKind::CorruptFrame, path.string() + " has different dimensions from frame 1");
    }
    std::vector<std::uint16_t> values(static_cast<std::size_t>(data.width) * data.height);
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<std::uint16_t>((data.bytes[2 * i] << 8) | data.bytes[2 * i + 1]);
    }
    frames.emplace_back(data.width, data.height, std::move(values));
  }
  return DepthSequence(std::move(frames), 30.0, dir.filename().string());
}

}  // namespace

DepthFrame::DepthFrame(std::size_t width, std::size_t height, std::vector<std::uint16_t> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 2 || height < 2) throw Error(ErrorKind::CorruptFrame, "depth frames must be at least 2x2");
  if (values_.size() != width * height) {
    throw Error(ErrorKind::CorruptFrame, "depth frame sample count does not match width x height");
  }
}

DepthFrame::DepthFrame(std::size_t width, std::size_t height, std::uint16_t fill)
    : DepthFrame(width, height, std::vector<std::uint16_t>(width * height, fill)) {}

DepthSequence::DepthSequence(std::vector<DepthFrame> frames, double frame_rate, std::string source_id)
    : frames_(std::move(frames)), frame_rate_(frame_rate), source_id_(std::move(source_id)) {
  if (frames_.empty()) throw Error(ErrorKind::EmptySequence, "a depth sequence needs at least one frame");
  for (const auto& f : frames_) {
    if (f.width() != frames_.front().width() || f.height() != frames_.front().height()) {
      throw Error(ErrorKind::CorruptFrame, "depth frames differ in size");
    }
  }
}

DepthSequence DepthSequence::slice(std::size_t first, std::size_t last) const {
  if (first < 1 || first > last || last > frames_.size()) {
    throw Error(ErrorKind::FrameOutOfRange, "slice [" + std::to_string(first) + ", " + std::to_string(last) +
                                                "] outside 1.." + std::to_string(frames_.size()));
  }
  return DepthSequence(std::vector<DepthFrame>(frames_.begin() + static_cast<std::ptrdiff_t>(first - 1),
                                               frames_.begin() + static_cast<std::ptrdiff_t>(last)),
                       frame_rate_, source_id_);
}

DepthSequence DepthSequence::reversed() const {
  return DepthSequence(std::vector<DepthFrame>(frames_.rbegin(), frames_.rend()), frame_rate_, source_id_);
}

SequenceFormat detect_format(const fs::path& path) {
  return fs::is_directory(path) ? SequenceFormat::png_dir : SequenceFormat::dseq;
}

DepthSequence load_depth_sequence(const fs::path& path, SequenceFormat format) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingPath, path.string() + " does not exist");
  return format == SequenceFormat::png_dir ? load_png_dir(path) : load_dseq(path);
}

DepthSequence load_depth_sequence(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingPath, path.string() + " does not exist");
  return load_depth_sequence(path, detect_format(path));
}

void save_depth_sequence(const DepthSequence& seq, const fs::path& path, SequenceFormat format) {
  if (format == SequenceFormat::dseq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
    out.write(kDseqMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(seq.width()));
    put_u32(out, static_cast<std::uint32_t>(seq.height()));
    put_u32(out, static_cast<std::uint32_t>(seq.size()));
    std::vector<char> buf(2 * seq.width() * seq.height());
    for (const auto& frame : seq.frames()) {
      const auto v = frame.values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        buf[2 * i] = static_cast<char>(v[i] & 0xff);
        buf[2 * i + 1] = static_cast<char>(v[i] >> 8);
      }
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    return;
  }

  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create directory " + path.string());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    PngData data;
    data.width = static_cast<png_uint_32>(seq.width());
    data.height = static_cast<png_uint_32>(seq.height());
    data.channels = 1;
    data.bit_depth = 16;
    const auto v = seq[f].values();
    data.bytes.resize(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      data.bytes[2 * i] = static_cast<std::uint8_t>(v[i] >> 8);
      data.bytes[2 * i + 1] = static_cast<std::uint8_t>(v[i] & 0xff);
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06zu.png", f + 1);
    write_png_file(path / name, data);
  }
}

DepthSequence rescale_depth(const DepthSequence& seq, double scale) {
  if (!(scale > 0) || !std::isfinite(scale)) throw Error(ErrorKind::InvalidArgument, "depth scale must be > 0");
  std::vector<DepthFrame> frames;
  frames.reserve(seq.size());
  for (const auto& frame : seq.frames()) {
    DepthFrame scaled = frame;
    for (auto& v : scaled.values()) {
      v = static_cast<std::uint16_t>(std::clamp(std::lround(v * scale), 0L, 65535L));
    }
    frames.push_back(std::move(scaled));
  }
  return DepthSequence(std::move(frames), seq.frame_rate(), seq.source_id());
}

DynamicImage quantize_field(const Field& field) {
  const std::size_t plane = field.plane_size();
  if (field.channels == 0 || field.values.size() != plane * field.channels || plane == 0) {
    throw Error(ErrorKind::DimensionMismatch, "field size does not match width x height x channels");
  }
  for (double v : field.values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteField, "field contains a non-finite value");
  }
  const auto [lo_it, hi_it] = std::minmax_element(field.values.begin(), field.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  DynamicImage img{field.width, field.height, field.channels,
                   std::vector<std::uint8_t>(plane * field.channels, 128)};
  if (hi == lo) return img;
  const double range = hi - lo;
  for (std::size_t c = 0; c < field.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = field.values[c * plane + i];
      img.pixels[i * field.channels + c] = static_cast<std::uint8_t>(std::lround((v - lo) / range * 255.0));
    }
  }
  return img;
}

void save_dynamic_image(const DynamicImage& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorKind::InvalidArgument, "dynamic images have 1 or 3 channels");
  }
  if (img.pixels.size() != img.width * img.height * img.channels) {
    throw Error(ErrorKind::DimensionMismatch, "image pixel count does not match its shape");
  }
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) throw Error(ErrorKind::IoFailure, "directory " + parent.string() + " does not exist");
  PngData data;
  data.width = static_cast<png_uint_32>(img.width);
  data.height = static_cast<png_uint_32>(img.height);
  data.channels = static_cast<int>(img.channels);
  data.bit_depth = 8;
  data.bytes = img.pixels;
  write_png_file(path, data);
}

DynamicImage load_dynamic_image(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingPath, path.string() + " does not exist");
  PngData data = read_png_file(path, ErrorKind::IoFailure);
  if (data.bit_depth != 8) throw Error(ErrorKind::IoFailure, path.string() + " is not an 8-bit PNG");
  return DynamicImage{data.width, data.height, static_cast<std::size_t>(data.channels), std::move(data.bytes)};
}

}  // namespace dpool
