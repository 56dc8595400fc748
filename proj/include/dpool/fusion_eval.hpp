#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dpool {

/// Non-negative per-class scores from one channel's classifier.
class ScoreVector {
 public:
  ScoreVector() = default;
  explicit ScoreVector(std::vector<double> scores);

  std::size_t size() const noexcept { return scores_.size(); }
  double operator[](std::size_t i) const { return scores_[i]; }
  const std::vector<double>& values() const noexcept { return scores_; }

 private:
  std::vector<double> scores_;
};

struct FusionResult {
  int label = 0;
  /// Product of the L1-normalised pair products; not itself normalised.
  std::vector<double> fused;
};

struct PredictionRecord {
  int predicted = 0;
  int truth = 0;
};

inline constexpr int kNoLabel = -1;

/// Per-frame class ids, kNoLabel where no action is performed.
struct FrameLabeling {
  std::vector<int> labels;

  std::size_t length() const noexcept { return labels.size(); }
};

ScoreVector l1_normalize(const ScoreVector& v);

/// Index of the largest entry, lowest index on ties.
int argmax(std::span<const double> v);

/// Channels are taken in consecutive pairs (forward, backward); each pair is
/// multiplied element-wise and L1-normalised, and the normalised vectors are
/// multiplied together. A trailing unpaired channel is normalised on its own.
FusionResult product_fuse(std::span<const ScoreVector> channels);

/// Single element-wise product of all channels, no intermediate normalisation.
FusionResult flat_product_fuse(std::span<const ScoreVector> channels);

double recognition_rate(std::span<const PredictionRecord> records);

double jaccard_class(const FrameLabeling& truth, const FrameLabeling& pred, int class_id);

/// Sum of per-class Jaccard over every class in truth or prediction, divided
/// by the number of distinct true labels. 0 when the truth has no labels.
double jaccard_sequence(const FrameLabeling& truth, const FrameLabeling& pred);

double mean_jaccard(std::span<const double> per_sequence);

}  // namespace dpool
