#include "dpool/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

#include "dpool/error.hpp"
#include "dpool/parallel.hpp"
#include "dpool/representations.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dpool {

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingPath, "cannot open " + path.string());
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

// Runs `parse` and turns JSON shape errors into InvalidArgument.
template <typename F>
auto parse_json(const fs::path& path, F&& parse) {
  try {
    return parse();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, path.string() + ": " + e.what());
  }
}

json segment_to_json(const ActionSegment& s) {
  json j = {{"start", s.start}, {"end", s.end}};
  if (s.label) j["label"] = *s.label;
  return j;
}

ActionSegment segment_from_json(const json& j) {
  ActionSegment s;
  s.start = j.at("start").get<std::size_t>();
  s.end = j.at("end").get<std::size_t>();
  if (j.contains("label") && !j.at("label").is_null()) s.label = j.at("label").get<int>();
  if (s.start < 1 || s.end < s.start) throw Error(ErrorKind::InvalidArgument, "segment with start > end");
  return s;
}

std::string segment_id(const std::string& source_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu", index + 1);
  return source_id + buf;
}

ImagePair encode_channel(Channel channel, const DepthSequence& segment, const PipelineConfig& config) {
  switch (channel) {
    case Channel::ddi: return build_ddi(segment, config.hierarchy, config.pool);
    case Channel::ddni: return build_ddni(segment, config.bg, config.hierarchy, config.pool);
    case Channel::ddmni: return build_ddmni(segment, config.gmm_params(), config.hierarchy, config.pool);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown channel");
}

}  // namespace

DepthSequence load_input(const fs::path& path, const PipelineConfig& config) {
  DepthSequence seq = load_depth_sequence(path);
  if (config.depth_scale != 1.0) seq = rescale_depth(seq, config.depth_scale);
  return seq;
}

SegmentationModel fit_segmenter(std::span<const TrainingPair> training, const PipelineConfig& config) {
  std::vector<DepthSequence> sequences;
  sequences.reserve(training.size());
  std::vector<LabeledSequence> labeled;
  for (const auto& pair : training) sequences.push_back(load_input(pair.sequence, config));
  for (std::size_t i = 0; i < training.size(); ++i) {
    labeled.push_back({&sequences[i], load_segments(training[i].segments)});
  }
  return fit_segmentation_model(labeled, config.qom);
}

std::vector<ActionSegment> run_segment(const fs::path& input, const SegmentationModel& model,
                                       const PipelineConfig& config, const fs::path& output) {
  const DepthSequence seq = load_input(input, config);
  auto segments = segment_actions(seq, model, config.qom);
  if (output.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(output.parent_path(), ec);
  }
  save_segments(segments, output);
  return segments;
}

// ---- manifest ---------------------------------------------------------------

std::size_t Manifest::error_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.errors.size();
  return n;
}

fs::path manifest_path(const PipelineConfig& config, const std::string& source_id) {
  return config.output_dir / (source_id + ".manifest.json");
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json errors = json::array();
    for (const auto& f : e.errors) errors.push_back({{"channel", f.channel}, {"kind", f.kind}, {"message", f.message}});
    entries.push_back({{"segment_id", e.segment_id},
                       {"segment", segment_to_json(e.segment)},
                       {"images", e.images},
                       {"errors", std::move(errors)}});
  }
  json channels = json::array();
  for (Channel c : manifest.channels) channels.push_back(channel_name(c));
  write_json({{"source_id", manifest.source_id},
              {"input", manifest.input},
              {"frames", manifest.frames},
              {"channels", std::move(channels)},
              {"segments", std::move(entries)}},
             path);
}

Manifest load_manifest(const fs::path& path) {
  const json doc = read_json(path);
  return parse_json(path, [&] {
    Manifest m;
    m.source_id = doc.at("source_id").get<std::string>();
    m.input = doc.at("input").get<std::string>();
    m.frames = doc.at("frames").get<std::size_t>();
    std::string channels;
    for (const auto& c : doc.at("channels")) channels += c.get<std::string>() + ",";
    m.channels = parse_channels(channels);
    for (const auto& item : doc.at("segments")) {
      ManifestEntry e;
      e.segment_id = item.at("segment_id").get<std::string>();
      e.segment = segment_from_json(item.at("segment"));
      e.images = item.at("images").get<std::map<std::string, std::string>>();
      for (const auto& f : item.at("errors")) {
        e.errors.push_back({f.at("channel").get<std::string>(), f.at("kind").get<std::string>(),
                            f.at("message").get<std::string>()});
      }
      m.entries.push_back(std::move(e));
    }
    m.dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    return m;
  });
}

Manifest run_encode(const fs::path& input, const fs::path& segments_path, const PipelineConfig& config) {
  config.validate();
  const DepthSequence seq = load_input(input, config);
  const auto segments = load_segments(segments_path);
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec || !fs::is_directory(config.output_dir)) {
    throw Error(ErrorKind::IoFailure, "cannot create output directory " + config.output_dir.string());
  }

  Manifest manifest;
  manifest.source_id = seq.source_id();
  manifest.input = input.string();
  manifest.frames = seq.size();
  manifest.channels = config.channels;
  manifest.dir = config.output_dir;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    manifest.entries.push_back({segment_id(seq.source_id(), i), segments[i], {}, {}});
  }

  // One task per (segment, channel); each writes only its own files and slot.
  const std::size_t channel_count = config.channels.size();
  struct Outcome {
    std::string fwd, bwd;
    std::optional<EncodeFailure> failure;
  };
  std::vector<Outcome> outcomes(segments.size() * channel_count);
  parallel_for(outcomes.size(), config.jobs, [&](std::size_t task) {
    const std::size_t s = task / channel_count;
    const Channel channel = config.channels[task % channel_count];
    const std::string name(channel_name(channel));
    const auto& entry = manifest.entries[s];
    Outcome& out = outcomes[task];
    try {
      const DepthSequence segment = seq.slice(entry.segment.start, entry.segment.end);
      const ImagePair images = encode_channel(channel, segment, config);
      out.fwd = entry.segment_id + "_" + name + "_fwd.png";
      out.bwd = entry.segment_id + "_" + name + "_bwd.png";
      save_dynamic_image(images.forward, config.output_dir / out.fwd);
      save_dynamic_image(images.backward, config.output_dir / out.bwd);
    } catch (const Error& e) {
      out.failure = EncodeFailure{name, std::string(to_string(e.kind())), e.what()};
    }
  });

  for (std::size_t task = 0; task < outcomes.size(); ++task) {
    auto& entry = manifest.entries[task / channel_count];
    const std::string name(channel_name(config.channels[task % channel_count]));
    auto& out = outcomes[task];
    if (out.failure) {
      entry.errors.push_back(std::move(*out.failure));
    } else {
      entry.images[name + "_fwd"] = out.fwd;
      entry.images[name + "_bwd"] = out.bwd;
    }
  }
  save_manifest(manifest, manifest_path(config, manifest.source_id));
  return manifest;
}

// ---- truth ------------------------------------------------------------------

std::optional<int> TruthSet::label_for(const std::string& source_id, const ManifestEntry& entry) const {
  if (auto it = segment_labels.find(entry.segment_id); it != segment_labels.end()) return it->second;
  auto seq = sequences.find(source_id);
  if (seq == sequences.end()) return std::nullopt;
  std::optional<int> best;
  std::size_t best_overlap = 0;
  for (const auto& span : seq->second.spans) {
    if (!span.label) continue;
    const std::size_t lo = std::max(span.start, entry.segment.start);
    const std::size_t hi = std::min(span.end, entry.segment.end);
    const std::size_t overlap = hi >= lo ? hi - lo + 1 : 0;
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = span.label;
    }
  }
  return best;
}

TruthSet load_truth(const fs::path& path) {
  const json doc = read_json(path);
  return parse_json(path, [&] {
    TruthSet truth;
    if (doc.contains("segments")) truth.segment_labels = doc.at("segments").get<std::map<std::string, int>>();
    if (doc.contains("sequences")) {
      for (const auto& item : doc.at("sequences")) {
        TruthSet::Sequence seq;
        seq.frames = item.at("frames").get<std::size_t>();
        for (const auto& span : item.at("spans")) {
          seq.spans.push_back(segment_from_json(span));
          if (seq.spans.back().end > seq.frames) {
            throw Error(ErrorKind::FrameOutOfRange, path.string() + ": span ends past the sequence");
          }
        }
        truth.sequences[item.at("source_id").get<std::string>()] = std::move(seq);
      }
    }
    return truth;
  });
}

void save_truth(const TruthSet& truth, const fs::path& path) {
  json sequences = json::array();
  for (const auto& [id, seq] : truth.sequences) {
    json spans = json::array();
    for (const auto& s : seq.spans) spans.push_back(segment_to_json(s));
    sequences.push_back({{"source_id", id}, {"frames", seq.frames}, {"spans", std::move(spans)}});
  }
  write_json({{"segments", truth.segment_labels}, {"sequences", std::move(sequences)}}, path);
}

FrameLabeling frame_labels(std::span<const ActionSegment> spans, std::size_t frames) {
  FrameLabeling out{std::vector<int>(frames, kNoLabel)};
  for (const auto& s : spans) {
    if (s.end > frames) throw Error(ErrorKind::LengthMismatch, "span ends past the labelled sequence");
    for (std::size_t f = s.start; f <= s.end; ++f) out.labels[f - 1] = s.label.value_or(kNoLabel);
  }
  return out;
}

// ---- baseline ---------------------------------------------------------------

std::vector<double> downsample(const DynamicImage& image, std::size_t size) {
  if (image.width == 0 || image.height == 0 || size == 0) {
    throw Error(ErrorKind::InvalidArgument, "cannot downsample an empty image");
  }
  const std::size_t ch = image.channels;
  std::vector<double> out(size * size * ch);
  const double sx = static_cast<double>(image.width) / static_cast<double>(size);
  const double sy = static_cast<double>(image.height) / static_cast<double>(size);
  const auto clamp_coord = [](double v, std::size_t extent) {
    return std::clamp(v, 0.0, static_cast<double>(extent - 1));
  };
  for (std::size_t y = 0; y < size; ++y) {
    const double fy = clamp_coord((static_cast<double>(y) + 0.5) * sy - 0.5, image.height);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = clamp_coord((static_cast<double>(x) + 0.5) * sx - 0.5, image.width);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < ch; ++c) {
        const double top = (1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        out[(y * size + x) * ch + c] = ((1 - wy) * top + wy * bottom) / 255.0;
      }
    }
  }
  return out;
}

CentroidModel::CentroidModel(std::size_t classes, std::size_t size,
                             std::map<std::string, std::vector<std::vector<double>>> centroids)
    : classes_(classes), size_(size), centroids_(std::move(centroids)) {
  if (classes_ < 2) throw Error(ErrorKind::MissingClassExamples, "the baseline needs at least two classes");
  for (const auto& [key, per_class] : centroids_) {
    if (per_class.size() != classes_) {
      throw Error(ErrorKind::MissingClassExamples, "channel " + key + " lacks a centroid for some class");
    }
    for (const auto& c : per_class) {
      if (c.size() != per_class.front().size()) {
        throw Error(ErrorKind::DimensionMismatch, "centroids of " + key + " differ in dimension");
      }
    }
  }
}

ScoreVector CentroidModel::score(const std::string& key, const DynamicImage& image) const {
  auto it = centroids_.find(key);
  if (it == centroids_.end()) throw Error(ErrorKind::MissingScores, "baseline has no centroids for " + key);
  const auto v = downsample(image, size_);
  std::vector<double> dist(classes_);
  for (std::size_t c = 0; c < classes_; ++c) {
    const auto& centroid = it->second[c];
    if (centroid.size() != v.size()) throw Error(ErrorKind::DimensionMismatch, key + " image has the wrong shape");
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) sum += (v[i] - centroid[i]) * (v[i] - centroid[i]);
    dist[c] = std::sqrt(sum);
  }
  // Shift by the nearest distance so the largest exponent is exactly 0.
  const double nearest = *std::min_element(dist.begin(), dist.end());
  std::vector<double> scores(classes_);
  double total = 0.0;
  for (std::size_t c = 0; c < classes_; ++c) {
    scores[c] = std::exp(nearest - dist[c]);
    total += scores[c];
  }
  for (double& s : scores) s /= total;
  return ScoreVector(std::move(scores));
}

CentroidModel train_baseline(std::span<const Manifest> manifests, const TruthSet& labels, std::size_t size) {
  struct Accumulator {
    std::map<int, std::vector<double>> sums;
    std::map<int, std::size_t> counts;
  };
  std::map<std::string, Accumulator> acc;
  std::set<std::string> expected_keys;
  int max_label = -1;
  for (const auto& m : manifests) {
    for (const auto& key : image_keys(m.channels)) expected_keys.insert(key);
    for (const auto& entry : m.entries) {
      const auto label = labels.label_for(m.source_id, entry);
      if (!label) continue;
      if (*label < 0) throw Error(ErrorKind::InvalidArgument, "class labels must be >= 0");
      max_label = std::max(max_label, *label);
      for (const auto& [key, file] : entry.images) {
        const auto v = downsample(load_dynamic_image(m.dir / file), size);
        auto& sum = acc[key].sums[*label];
        if (sum.empty()) sum.assign(v.size(), 0.0);
        if (sum.size() != v.size()) throw Error(ErrorKind::DimensionMismatch, key + " images differ in shape");
        for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
        ++acc[key].counts[*label];
      }
    }
  }
  const auto classes = static_cast<std::size_t>(max_label + 1);
  if (classes < 2) throw Error(ErrorKind::MissingClassExamples, "training data covers fewer than two classes");
  std::map<std::string, std::vector<std::vector<double>>> centroids;
  for (const auto& key : expected_keys) {
    auto& a = acc[key];
    std::size_t dim = 0;
    for (const auto& [label, sum] : a.sums) dim = std::max(dim, sum.size());
    auto& per_class = centroids[key];
    for (std::size_t c = 0; c < classes; ++c) {
      auto it = a.sums.find(static_cast<int>(c));
      if (it == a.sums.end()) {
        throw Error(ErrorKind::MissingClassExamples,
                    "no " + key + " training example for class " + std::to_string(c));
      }
      if (it->second.size() != dim) throw Error(ErrorKind::DimensionMismatch, key + " images differ in shape");
      std::vector<double> mean = it->second;
      const double n = static_cast<double>(a.counts[static_cast<int>(c)]);
      for (double& x : mean) x /= n;
      per_class.push_back(std::move(mean));
    }
  }
  return CentroidModel(classes, size, std::move(centroids));
}

void save_centroid_model(const CentroidModel& model, const fs::path& path) {
  write_json({{"classes", model.classes()}, {"size", model.size()}, {"centroids", model.centroids()}}, path);
}

CentroidModel load_centroid_model(const fs::path& path) {
  const json doc = read_json(path);
  return parse_json(path, [&] {
    return CentroidModel(doc.at("classes").get<std::size_t>(), doc.at("size").get<std::size_t>(),
                         doc.at("centroids").get<std::map<std::string, std::vector<std::vector<double>>>>());
  });
}

// ---- scores, fusion, metrics ------------------------------------------------

std::vector<ScoreRecord> classify(std::span<const Manifest> manifests, const CentroidModel& model) {
  std::vector<ScoreRecord> out;
  for (const auto& m : manifests) {
    for (const auto& entry : m.entries) {
      for (const auto& key : image_keys(m.channels)) {
        auto it = entry.images.find(key);
        if (it == entry.images.end()) continue;
        const auto scores = model.score(key, load_dynamic_image(m.dir / it->second));
        out.push_back({entry.segment_id, key, scores.values()});
      }
    }
  }
  return out;
}

void save_scores(std::span<const ScoreRecord> records, const fs::path& path) {
  json doc = json::array();
  for (const auto& r : records) doc.push_back({{"segment_id", r.segment_id}, {"channel", r.channel}, {"scores", r.scores}});
  write_json(doc, path);
}

std::vector<ScoreRecord> load_scores(const fs::path& path) {
  const json doc = read_json(path);
  return parse_json(path, [&] {
    std::vector<ScoreRecord> out;
    for (const auto& item : doc) {
      out.push_back({item.at("segment_id").get<std::string>(), item.at("channel").get<std::string>(),
                     item.at("scores").get<std::vector<double>>()});
    }
    return out;
  });
}

Metrics evaluate(std::span<const Manifest> manifests, std::span<const ScoreRecord> scores, const TruthSet& truth) {
  std::map<std::pair<std::string, std::string>, const ScoreRecord*> index;
  for (const auto& r : scores) index[{r.segment_id, r.channel}] = &r;

  Metrics metrics;
  std::vector<PredictionRecord> records;
  std::vector<double> jaccards;
  for (const auto& m : manifests) {
    std::vector<ActionSegment> predicted_spans;
    for (const auto& entry : m.entries) {
      ActionSegment span = entry.segment;
      span.label.reset();
      if (!entry.errors.empty()) {
        metrics.skipped.emplace_back(entry.segment_id, "encode failed: " + entry.errors.front().kind);
        predicted_spans.push_back(span);
        continue;
      }
      std::vector<ScoreVector> channels;
      for (const auto& key : image_keys(m.channels)) {
        auto it = index.find({entry.segment_id, key});
        if (it == index.end()) {
          throw Error(ErrorKind::MissingScores, "no " + key + " scores for segment " + entry.segment_id);
        }
        channels.emplace_back(it->second->scores);
      }
      FusionResult fused = product_fuse(channels);
      const auto label = truth.label_for(m.source_id, entry);
      if (label) records.push_back({fused.label, *label});
      span.label = fused.label;
      predicted_spans.push_back(span);
      metrics.predictions.push_back({entry.segment_id, fused.label, label, std::move(fused.fused)});
    }

    auto seq = truth.sequences.find(m.source_id);
    if (seq == truth.sequences.end()) continue;
    if (seq->second.frames != m.frames) {
      throw Error(ErrorKind::LengthMismatch, m.source_id + ": truth and manifest disagree on the frame count");
    }
    const double jaccard = jaccard_sequence(frame_labels(seq->second.spans, m.frames),
                                            frame_labels(predicted_spans, m.frames));
    const double lev = levenshtein_segmentation_score(predicted_spans, seq->second.spans);
    metrics.per_sequence.push_back({m.source_id, jaccard, lev});
    jaccards.push_back(jaccard);
  }
  if (!records.empty()) metrics.recognition_rate = recognition_rate(records);
  if (!jaccards.empty()) metrics.mean_jaccard = mean_jaccard(jaccards);
  return metrics;
}

void save_metrics(const Metrics& metrics, const fs::path& path) {
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per_sequence = json::array();
  for (const auto& s : metrics.per_sequence) {
    per_sequence.push_back({{"source_id", s.source_id}, {"jaccard", s.jaccard}, {"levenshtein", s.levenshtein}});
  }
  json predictions = json::array();
  for (const auto& p : metrics.predictions) {
    predictions.push_back({{"segment_id", p.segment_id},
                           {"predicted", p.predicted},
                           {"truth", p.truth ? json(*p.truth) : json(nullptr)},
                           {"fused", p.fused}});
  }
  json skipped = json::array();
  for (const auto& [id, reason] : metrics.skipped) skipped.push_back({{"segment_id", id}, {"reason", reason}});
  write_json({{"recognition_rate", opt(metrics.recognition_rate)},
              {"mean_jaccard", opt(metrics.mean_jaccard)},
              {"segments_scored", metrics.predictions.size()},
              {"per_sequence", std::move(per_sequence)},
              {"predictions", std::move(predictions)},
              {"skipped_segments", std::move(skipped)}},
             path);
}

}  // namespace dpool
