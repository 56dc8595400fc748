#include "dpool/fusion_eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dpool/error.hpp"

namespace dpool {

ScoreVector::ScoreVector(std::vector<double> scores) : scores_(std::move(scores)) {
  if (scores_.size() < 2) throw Error(ErrorKind::InvalidArgument, "a score vector needs at least two classes");
  for (double s : scores_) {
    if (!std::isfinite(s) || s < 0.0) throw Error(ErrorKind::InvalidArgument, "scores must be finite and >= 0");
  }
}

ScoreVector l1_normalize(const ScoreVector& v) {
  double sum = 0.0;
  for (double s : v.values()) sum += s;
  if (!(sum > 0.0)) throw Error(ErrorKind::ZeroVector, "cannot L1-normalise an all-zero score vector");
  std::vector<double> out(v.values());
  for (double& s : out) s /= sum;
  return ScoreVector(std::move(out));
}

int argmax(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorKind::EmptyInput, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

namespace {

void check_lengths(std::span<const ScoreVector> channels) {
  if (channels.empty()) throw Error(ErrorKind::EmptyInput, "fusion needs at least one channel");
  for (const auto& c : channels) {
    if (c.size() != channels.front().size()) throw Error(ErrorKind::LengthMismatch, "score vectors differ in length");
  }
}

std::vector<double> multiply(std::vector<double> acc, const std::vector<double>& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] *= v[i];
  return acc;
}

}  // namespace

FusionResult product_fuse(std::span<const ScoreVector> channels) {
  check_lengths(channels);
  const std::size_t classes = channels.front().size();
  std::vector<double> fused(classes, 1.0);
  for (std::size_t c = 0; c < channels.size(); c += 2) {
    std::vector<double> group = channels[c].values();
    if (c + 1 < channels.size()) group = multiply(std::move(group), channels[c + 1].values());
    double sum = 0.0;
    for (double s : group) sum += s;
    if (!(sum > 0.0)) throw Error(ErrorKind::ZeroVector, "a channel pair multiplies to the zero vector");
    for (double& s : group) s /= sum;
    fused = multiply(std::move(fused), group);
  }
  const int label = argmax(fused);
  return {label, std::move(fused)};
}

FusionResult flat_product_fuse(std::span<const ScoreVector> channels) {
  check_lengths(channels);
  std::vector<double> fused(channels.front().size(), 1.0);
  for (const auto& c : channels) fused = multiply(std::move(fused), c.values());
  const int label = argmax(fused);
  return {label, std::move(fused)};
}

double recognition_rate(std::span<const PredictionRecord> records) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "recognition rate of no predictions");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.predicted == r.truth ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double jaccard_class(const FrameLabeling& truth, const FrameLabeling& pred, int class_id) {
  if (truth.length() != pred.length()) throw Error(ErrorKind::LengthMismatch, "labelings differ in length");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t f = 0; f < truth.length(); ++f) {
    const bool g = truth.labels[f] == class_id;
    const bool p = pred.labels[f] == class_id;
    inter += (g && p) ? 1 : 0;
    uni += (g || p) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_sequence(const FrameLabeling& truth, const FrameLabeling& pred) {
  if (truth.length() != pred.length()) throw Error(ErrorKind::LengthMismatch, "labelings differ in length");
  std::set<int> true_classes;
  std::set<int> all_classes;
  for (int l : truth.labels) {
    if (l == kNoLabel) continue;
    true_classes.insert(l);
    all_classes.insert(l);
  }
  for (int l : pred.labels) {
    if (l != kNoLabel) all_classes.insert(l);
  }
  if (true_classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : all_classes) sum += jaccard_class(truth, pred, c);
  return sum / static_cast<double>(true_classes.size());
}

double mean_jaccard(std::span<const double> per_sequence) {
  if (per_sequence.empty()) throw Error(ErrorKind::EmptyInput, "mean Jaccard of no sequences");
  double sum = 0.0;
  for (double j : per_sequence) sum += j;
  return sum / static_cast<double>(per_sequence.size());
}

}  // namespace dpool
