#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpool/config.hpp"
#include "dpool/depth_io.hpp"
#include "dpool/fusion_eval.hpp"
#include "dpool/segmentation.hpp"

namespace dpool {

/// Loads a sequence in either on-disk format and applies config.depth_scale.
DepthSequence load_input(const std::filesystem::path& path, const PipelineConfig& config);

// ---- segmentation -----------------------------------------------------------

struct TrainingPair {
  std::filesystem::path sequence;
  std::filesystem::path segments;
};

SegmentationModel fit_segmenter(std::span<const TrainingPair> training, const PipelineConfig& config);

/// Segments `input` and writes the segment list to `output`.
std::vector<ActionSegment> run_segment(const std::filesystem::path& input, const SegmentationModel& model,
                                       const PipelineConfig& config, const std::filesystem::path& output);

// ---- encoding ---------------------------------------------------------------

struct EncodeFailure {
  std::string channel;
  std::string kind;
  std::string message;
};

struct ManifestEntry {
  std::string segment_id;
  ActionSegment segment;
  /// Image key ("ddi_fwd", ...) -> file name relative to the manifest.
  std::map<std::string, std::string> images;
  std::vector<EncodeFailure> errors;
};

struct Manifest {
  std::string source_id;
  std::string input;
  std::size_t frames = 0;
  std::vector<Channel> channels;
  std::vector<ManifestEntry> entries;
  /// Directory holding the manifest; image paths resolve against it.
  std::filesystem::path dir;

  std::size_t error_count() const;
};

/// Writes forward and backward PNGs for every segment and enabled channel into
/// config.output_dir, plus <source_id>.manifest.json. A segment/channel that
/// fails is recorded in the manifest and the run continues.
Manifest run_encode(const std::filesystem::path& input, const std::filesystem::path& segments,
                    const PipelineConfig& config);

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
std::filesystem::path manifest_path(const PipelineConfig& config, const std::string& source_id);

// ---- ground truth -----------------------------------------------------------

/// Labels by segment id and/or labelled frame spans per source sequence:
/// {"segments": {"<id>": label}, "sequences": [{"source_id", "frames", "spans"}]}
struct TruthSet {
  std::map<std::string, int> segment_labels;
  struct Sequence {
    std::size_t frames = 0;
    std::vector<ActionSegment> spans;
  };
  std::map<std::string, Sequence> sequences;

  /// Explicit id label first, otherwise the span overlapping the segment most
  /// (earliest on ties).
  std::optional<int> label_for(const std::string& source_id, const ManifestEntry& entry) const;
};

TruthSet load_truth(const std::filesystem::path& path);
void save_truth(const TruthSet& truth, const std::filesystem::path& path);

/// Frame labels from spans; a later span owns a boundary frame it shares with
/// an earlier one.
FrameLabeling frame_labels(std::span<const ActionSegment> spans, std::size_t frames);

// ---- nearest-centroid baseline ----------------------------------------------

class CentroidModel {
 public:
  CentroidModel() = default;
  CentroidModel(std::size_t classes, std::size_t size, std::map<std::string, std::vector<std::vector<double>>> centroids);

  std::size_t classes() const noexcept { return classes_; }
  std::size_t size() const noexcept { return size_; }
  const std::map<std::string, std::vector<std::vector<double>>>& centroids() const noexcept { return centroids_; }

  /// Softmax of negative Euclidean distances to each class centroid.
  ScoreVector score(const std::string& key, const DynamicImage& image) const;

 private:
  std::size_t classes_ = 0;
  std::size_t size_ = 32;
  std::map<std::string, std::vector<std::vector<double>>> centroids_;
};

/// Bilinear resize to size x size, pixels scaled to [0, 1], interleaved.
std::vector<double> downsample(const DynamicImage& image, std::size_t size);

CentroidModel train_baseline(std::span<const Manifest> manifests, const TruthSet& labels, std::size_t size);
CentroidModel load_centroid_model(const std::filesystem::path& path);
void save_centroid_model(const CentroidModel& model, const std::filesystem::path& path);

// ---- scores, fusion, metrics ------------------------------------------------

struct ScoreRecord {
  std::string segment_id;
  /// Image key, e.g. "ddni_bwd".
  std::string channel;
  std::vector<double> scores;
};

std::vector<ScoreRecord> classify(std::span<const Manifest> manifests, const CentroidModel& model);
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);
void save_scores(std::span<const ScoreRecord> records, const std::filesystem::path& path);

struct SegmentPrediction {
  std::string segment_id;
  int predicted = 0;
  std::optional<int> truth;
  std::vector<double> fused;
};

struct SequenceMetrics {
  std::string source_id;
  double jaccard = 0.0;
  double levenshtein = 0.0;
};

struct Metrics {
  std::optional<double> recognition_rate;
  std::optional<double> mean_jaccard;
  std::vector<SequenceMetrics> per_sequence;
  std::vector<SegmentPrediction> predictions;
  /// Segment id -> reason it was not fused.
  std::vector<std::pair<std::string, std::string>> skipped;
};

/// Fuses the scores of every encoded segment (channels in manifest order) and
/// scores the fused labels against `truth`.
Metrics evaluate(std::span<const Manifest> manifests, std::span<const ScoreRecord> scores, const TruthSet& truth);
void save_metrics(const Metrics& metrics, const std::filesystem::path& path);

}  // namespace dpool
