#include "dpool/segmentation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>

#include "dpool/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dpool {

void QomParams::validate() const {
  if (threshold_qom <= 0) throw Error(ErrorKind::InvalidArgument, "threshold_qom must be > 0");
  if (!(tail_fraction > 0.0 && tail_fraction < 0.5)) {
    throw Error(ErrorKind::InvalidArgument, "tail_fraction must lie in (0, 0.5)");
  }
  if (window_divisor < 1) throw Error(ErrorKind::InvalidArgument, "window_divisor must be >= 1");
}

std::size_t SegmentationModel::window(const QomParams& params) const {
  const auto w = static_cast<std::size_t>(std::floor(avg_length / params.window_divisor));
  return std::max<std::size_t>(w, 1);
}

void SegmentationModel::validate() const {
  if (!(avg_length >= 1.0)) throw Error(ErrorKind::InvalidArgument, "avg_length must be >= 1");
  if (!(threshold_inter >= 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold_inter must be >= 0");
}

std::uint64_t compute_qom(const DepthSequence& seq, std::size_t t, int threshold_qom) {
  if (t < 1 || t > seq.size()) {
    throw Error(ErrorKind::FrameOutOfRange,
                "frame " + std::to_string(t) + " outside 1.." + std::to_string(seq.size()));
  }
  const auto first = seq[0].values();
  const auto current = seq[t - 1].values();
  std::uint64_t moved = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (std::abs(static_cast<int>(current[i]) - static_cast<int>(first[i])) >= threshold_qom) ++moved;
  }
  return moved;
}

std::vector<std::uint64_t> qom_profile(const DepthSequence& seq, int threshold_qom) {
  std::vector<std::uint64_t> profile(seq.size());
  for (std::size_t t = 1; t <= seq.size(); ++t) profile[t - 1] = compute_qom(seq, t, threshold_qom);
  return profile;
}

SegmentationModel fit_segmentation_model(std::span<const LabeledSequence> training, const QomParams& params) {
  params.validate();
  std::size_t segment_count = 0;
  double length_sum = 0.0;
  for (const auto& item : training) {
    if (item.sequence == nullptr) continue;
    for (const auto& seg : item.segments) {
      if (seg.start < 1 || seg.start > seg.end || seg.end > item.sequence->size()) {
        throw Error(ErrorKind::FrameOutOfRange, "training segment outside its sequence");
      }
      length_sum += static_cast<double>(seg.length());
      ++segment_count;
    }
  }
  if (segment_count == 0) throw Error(ErrorKind::NoTrainingData, "no labelled training segments");

  SegmentationModel model;
  model.avg_length = length_sum / static_cast<double>(segment_count);
  const auto tail = static_cast<std::size_t>(std::ceil(params.tail_fraction * model.avg_length));

  // Each frame of a segment contributes at most once even when its head and
  // tail windows overlap.
  std::vector<double> samples;
  for (const auto& item : training) {
    if (item.sequence == nullptr) continue;
    const auto profile = qom_profile(*item.sequence, params.threshold_qom);
    for (const auto& seg : item.segments) {
      std::set<std::size_t> frames;
      for (std::size_t k = 0; k < tail && seg.start + k <= seg.end; ++k) {
        frames.insert(seg.start + k);
        frames.insert(seg.end - k);
      }
      for (std::size_t f : frames) samples.push_back(static_cast<double>(profile[f - 1]));
    }
  }

  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= static_cast<double>(samples.size());
  model.threshold_inter = mean + 2.0 * std::sqrt(var);
  return model;
}

std::vector<std::size_t> refine_boundaries(std::span<const std::uint64_t> qom, double threshold_inter,
                                           std::size_t window) {
  const std::size_t n = qom.size();
  if (n == 0) return {};
  window = std::clamp<std::size_t>(window, 1, n);

  std::vector<bool> candidate(n);
  for (std::size_t i = 0; i < n; ++i) candidate[i] = static_cast<double>(qom[i]) < threshold_inter;

  // The window slides one frame at a time over all positions that fit in the
  // stream. In every session the candidate with minimum QOM (earliest on ties)
  // wins and every other candidate in that session is discarded.
  std::vector<bool> keep = candidate;
  for (std::size_t s = 0; s + window <= n; ++s) {
    std::size_t best = n;
    for (std::size_t i = s; i < s + window; ++i) {
      if (candidate[i] && (best == n || qom[i] < qom[best])) best = i;
    }
    for (std::size_t i = s; i < s + window; ++i) {
      if (i != best) keep[i] = false;
    }
  }

  std::vector<std::size_t> boundaries;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) boundaries.push_back(i + 1);
  }
  return boundaries;
}

std::vector<ActionSegment> segment_actions(const DepthSequence& seq, const SegmentationModel& model,
                                           const QomParams& params) {
  params.validate();
  model.validate();
  const std::size_t n = seq.size();
  const std::size_t window = model.window(params);
  if (n <= window) return {ActionSegment{1, n, std::nullopt}};

  const auto profile = qom_profile(seq, params.threshold_qom);
  std::vector<std::size_t> cuts = refine_boundaries(profile, model.threshold_inter, window);
  cuts.push_back(1);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<ActionSegment> segments;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) segments.push_back({cuts[i], cuts[i + 1], std::nullopt});
  if (segments.empty()) segments.push_back({1, n, std::nullopt});
  return segments;
}

std::size_t levenshtein_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double levenshtein_segmentation_score(std::span<const ActionSegment> pred, std::span<const ActionSegment> truth) {
  const std::size_t longest = std::max(pred.size(), truth.size());
  if (longest == 0) return 100.0;
  auto symbols = [](std::span<const ActionSegment> segs) {
    std::vector<int> out;
    out.reserve(segs.size());
    for (const auto& s : segs) out.push_back(s.label.value_or(-1));
    return out;
  };
  const auto a = symbols(pred);
  const auto b = symbols(truth);
  const double d = static_cast<double>(levenshtein_distance(a, b));
  return 100.0 * (1.0 - d / static_cast<double>(longest));
}

std::vector<ActionSegment> load_segments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingPath, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::InvalidArgument, path.string() + ": expected a JSON array");
  std::vector<ActionSegment> segments;
  for (const auto& item : doc) {
    try {
      ActionSegment seg;
      seg.start = item.at("start").get<std::size_t>();
      seg.end = item.at("end").get<std::size_t>();
      if (item.contains("label") && !item.at("label").is_null()) seg.label = item.at("label").get<int>();
      if (seg.start < 1 || seg.end < seg.start) {
        throw Error(ErrorKind::InvalidArgument, path.string() + ": segment with start > end");
      }
      segments.push_back(seg);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
    }
  }
  return segments;
}

void save_segments(std::span<const ActionSegment> segments, const fs::path& path) {
  json doc = json::array();
  for (const auto& seg : segments) {
    json item = {{"start", seg.start}, {"end", seg.end}};
    if (seg.label) item["label"] = *seg.label;
    doc.push_back(std::move(item));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out << doc.dump(2) << '\n';
}

SegmentationModel load_segmentation_model(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingPath, "cannot open " + path.string());
  try {
    json doc;
    in >> doc;
    SegmentationModel model{doc.at("avg_length").get<double>(), doc.at("threshold_inter").get<double>()};
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

void save_segmentation_model(const SegmentationModel& model, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out << json{{"avg_length", model.avg_length}, {"threshold_inter", model.threshold_inter}}.dump(2) << '\n';
}

}  // namespace dpool
