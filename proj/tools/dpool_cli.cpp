// dpool: segment depth streams, encode dynamic images, classify, fuse, score.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dpool/config.hpp"
#include "dpool/error.hpp"
#include "dpool/pipeline.hpp"
#include "dpool/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Overrides {
  std::string config;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> channels;

  dpool::PipelineConfig resolve() const {
    dpool::PipelineConfig c = config.empty() ? dpool::PipelineConfig{} : dpool::load_config(config);
    if (jobs) c.jobs = *jobs;
    if (seed) c.seed = *seed;
    if (output_dir) c.output_dir = *output_dir;
    if (channels) c.channels = dpool::parse_channels(*channels);
    c.validate();
    return c;
  }
};

std::vector<dpool::Manifest> load_manifests(const std::vector<std::string>& paths) {
  std::vector<dpool::Manifest> out;
  for (const auto& p : paths) out.push_back(dpool::load_manifest(p));
  return out;
}

void print_metrics(const dpool::Metrics& m) {
  const auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("n/a"); };
  std::cout << "segments scored: " << m.predictions.size() << "\n"
            << "skipped: " << m.skipped.size() << "\n"
            << "recognition rate: " << show(m.recognition_rate) << "\n"
            << "mean jaccard: " << show(m.mean_jaccard) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-sequence action segmentation and dynamic-image encoding"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--config", ov.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--jobs", ov.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", ov.seed, "seed for randomised steps");
  app.add_option("--output-dir", ov.output_dir, "directory for generated files");
  app.add_option("--channels", ov.channels, "comma list from ddi,ddni,ddmni");

  std::string input;
  std::string segments;
  std::string output;
  std::string model;
  std::string scores;
  std::string truth;
  std::string labels;
  std::vector<std::string> manifests;
  std::vector<std::string> inputs;
  std::vector<std::string> segment_files;

  auto* segment = app.add_subcommand("segment", "split a depth stream into actions");
  segment->add_option("--input", input, "depth sequence (.dseq file or PNG directory)")->required();
  segment->add_option("--model", model, "segmentation model JSON from fit-segmenter")->required();
  segment->add_option("--output", output, "segments JSON (default <output-dir>/<source>.segments.json)");

  auto* fit = app.add_subcommand("fit-segmenter", "estimate the QOM threshold and average action length");
  fit->add_option("--input", inputs, "training sequence, repeatable")->required();
  fit->add_option("--segments", segment_files, "labelled segments for each --input, same order")->required();
  fit->add_option("--output", output, "model JSON")->required();

  auto* encode = app.add_subcommand("encode", "write forward/backward dynamic images per segment");
  encode->add_option("--input", input, "depth sequence")->required();
  encode->add_option("--segments", segments, "segments JSON")->required();

  auto* train = app.add_subcommand("train-baseline", "fit the nearest-centroid classifier");
  train->add_option("--manifest", manifests, "encode manifest, repeatable")->required();
  train->add_option("--labels", labels, "truth JSON with segment labels or labelled spans")->required();
  train->add_option("--output", output, "model JSON")->required();

  auto* cls = app.add_subcommand("classify", "score encoded segments with a baseline model");
  cls->add_option("--manifest", manifests, "encode manifest, repeatable")->required();
  cls->add_option("--model", model, "baseline model JSON")->required();
  cls->add_option("--output", output, "scores JSON")->required();

  auto* eval = app.add_subcommand("eval", "fuse channel scores and compute metrics");
  eval->add_option("--manifest", manifests, "encode manifest, repeatable")->required();
  auto* eval_model = eval->add_option("--model", model, "baseline model JSON");
  auto* eval_scores = eval->add_option("--scores", scores, "precomputed scores JSON");
  eval_model->excludes(eval_scores);
  eval->add_option("--truth", truth, "truth JSON")->required();
  eval->add_option("--output", output, "metrics JSON (default <output-dir>/metrics.json)");

  bool dump = false;
  auto* cfg = app.add_subcommand("config", "print the effective configuration");
  cfg->add_flag("--dump", dump, "print every key with its value")->required();

  int classes = 2;
  std::size_t per_class = 10;
  std::size_t gestures = 3;
  dpool::SceneOptions scene;
  auto* synth = app.add_subcommand("synth", "generate the moving-block gesture dataset");
  synth->add_option("--classes", classes, "gesture classes (1-4)")->check(CLI::Range(1, 4));
  synth->add_option("--per-class", per_class, "sequences per class")->check(CLI::PositiveNumber);
  synth->add_option("--gestures", gestures, "gestures per sequence")->check(CLI::PositiveNumber);
  synth->add_option("--noise", scene.noise, "per-frame depth noise amplitude")->check(CLI::Range(0, 100));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const dpool::PipelineConfig config = ov.resolve();

    if (*segment) {
      const fs::path out = output.empty() ? config.output_dir / (fs::path(input).stem().string() + ".segments.json")
                                          : fs::path(output);
      const auto segs = dpool::run_segment(input, dpool::load_segmentation_model(model), config, out);
      std::cout << segs.size() << " segments -> " << out.string() << "\n";
    } else if (*fit) {
      if (inputs.size() != segment_files.size()) {
        throw dpool::Error(dpool::ErrorKind::InvalidArgument, "each --input needs a matching --segments");
      }
      std::vector<dpool::TrainingPair> pairs;
      for (std::size_t i = 0; i < inputs.size(); ++i) pairs.push_back({inputs[i], segment_files[i]});
      const auto m = dpool::fit_segmenter(pairs, config);
      if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
      dpool::save_segmentation_model(m, output);
      std::cout << "avg_length " << m.avg_length << " threshold_inter " << m.threshold_inter << "\n";
    } else if (*encode) {
      const auto manifest = dpool::run_encode(input, segments, config);
      std::cout << manifest.entries.size() << " segments, " << manifest.error_count() << " failures -> "
                << dpool::manifest_path(config, manifest.source_id).string() << "\n";
    } else if (*train) {
      const auto loaded = load_manifests(manifests);
      const auto m = dpool::train_baseline(loaded, dpool::load_truth(labels), config.baseline_size);
      dpool::save_centroid_model(m, output);
      std::cout << m.classes() << " classes, " << m.centroids().size() << " image keys -> " << output << "\n";
    } else if (*cls) {
      const auto loaded = load_manifests(manifests);
      const auto records = dpool::classify(loaded, dpool::load_centroid_model(model));
      dpool::save_scores(records, output);
      std::cout << records.size() << " score vectors -> " << output << "\n";
    } else if (*eval) {
      if (model.empty() == scores.empty()) {
        std::cerr << "eval: exactly one of --model or --scores is required\n";
        return kExitUsage;
      }
      const auto loaded = load_manifests(manifests);
      const auto records =
          scores.empty() ? dpool::classify(loaded, dpool::load_centroid_model(model)) : dpool::load_scores(scores);
      const auto metrics = dpool::evaluate(loaded, records, dpool::load_truth(truth));
      const fs::path out = output.empty() ? config.output_dir / "metrics.json" : fs::path(output);
      dpool::save_metrics(metrics, out);
      print_metrics(metrics);
    } else if (*cfg) {
      dpool::dump_config(config, std::cout);
    } else if (*synth) {
      const auto items = dpool::make_gesture_dataset(classes, per_class, gestures, scene, config.seed);
      dpool::write_gesture_dataset(items, config.output_dir);
      std::cout << items.size() << " sequences -> " << config.output_dir.string() << "\n";
    }
  } catch (const dpool::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
