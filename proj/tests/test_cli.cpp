#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run_cli(const fs::path& scratch, const std::string& args) {
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + DPOOL_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  fixture::TempDir dir("cli_usage");
  CHECK(run_cli(dir.path, "").code == 1);
  CHECK(run_cli(dir.path, "frobnicate").code == 1);
  CHECK(run_cli(dir.path, "segment --model m.json").code == 1);
  CHECK(run_cli(dir.path, "--help").code == 0);
}

TEST_CASE("config --dump prints every section") {
  fixture::TempDir dir("cli_config");
  const auto r = run_cli(dir.path, "config --dump --seed 9 --channels ddi");
  CHECK(r.code == 0);
  for (const char* s : {"[io]", "[qom]", "[background]", "[gmm]", "[rank_pool]", "[hierarchy]", "[pipeline]"}) {
    CHECK(r.out.find(s) != std::string::npos);
  }
  CHECK(r.out.find("seed = 9") != std::string::npos);
  CHECK(r.out.find("channels = ddi\n") != std::string::npos);

  std::ofstream(dir.path / "c.ini") << r.out;
  const auto again = run_cli(dir.path, "config --dump --config \"" + (dir.path / "c.ini").string() + "\"");
  CHECK(again.code == 0);
  CHECK(again.out == r.out);

  std::ofstream(dir.path / "bad.ini") << "[gmm]\nbogus = 1\n";
  CHECK(run_cli(dir.path, "config --dump --config \"" + (dir.path / "bad.ini").string() + "\"").code == 2);
}

TEST_CASE("data errors exit with 2") {
  fixture::TempDir dir("cli_data");
  std::ofstream(dir.path / "model.json") << R"({"avg_length": 10, "threshold_inter": 5})";
  const auto r = run_cli(dir.path, "segment --input \"" + (dir.path / "missing.dseq").string() + "\" --model \"" +
                                     (dir.path / "model.json").string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.err.find("MissingPath") != std::string::npos);
}

TEST_CASE("synth, segment, encode, train, classify and eval from the command line") {
  fixture::TempDir dir("cli_flow");
  const auto data = dir.path / "data";
  const auto out = dir.path / "out";
  REQUIRE(run_cli(dir.path, "synth --per-class 2 --gestures 2 --output-dir \"" + data.string() + "\"").code == 0);
  const auto index = nlohmann::json::parse(slurp(data / "dataset.json"));
  REQUIRE(index.size() == 4);

  std::string fit_args;
  for (const auto& item : index) {
    const std::string id = item["source_id"];
    fit_args += " --input \"" + (data / (id + ".dseq")).string() + "\" --segments \"" +
                (data / (id + ".segments.json")).string() + "\"";
  }
  REQUIRE(run_cli(dir.path, "fit-segmenter" + fit_args + " --output \"" + (out / "seg.json").string() + "\"").code ==
          0);

  nlohmann::json truth = {{"segments", nlohmann::json::object()}, {"sequences", nlohmann::json::array()}};
  std::string manifests;
  for (const auto& item : index) {
    const std::string id = item["source_id"];
    const auto segs = out / (id + ".segments.json");
    REQUIRE(run_cli(dir.path, "segment --input \"" + (data / (id + ".dseq")).string() + "\" --model \"" +
                                (out / "seg.json").string() + "\" --output \"" + segs.string() + "\"")
                .code == 0);
    const auto r = run_cli(dir.path, "encode --channels ddi --jobs 2 --input \"" + (data / (id + ".dseq")).string() +
                                       "\" --segments \"" + segs.string() + "\" --output-dir \"" + out.string() + "\"");
    REQUIRE(r.code == 0);
    manifests += " --manifest \"" + (out / (id + ".manifest.json")).string() + "\"";
    truth["sequences"].push_back({{"source_id", id},
                                  {"frames", item["frames"]},
                                  {"spans", nlohmann::json::parse(slurp(data / (id + ".segments.json")))}});
  }
  std::ofstream(dir.path / "truth.json") << truth.dump();
  const std::string truth_arg = " --truth \"" + (dir.path / "truth.json").string() + "\"";

  REQUIRE(run_cli(dir.path, "train-baseline" + manifests + " --labels \"" + (dir.path / "truth.json").string() +
                              "\" --output \"" + (out / "baseline.json").string() + "\"")
              .code == 0);
  REQUIRE(run_cli(dir.path, "classify" + manifests + " --model \"" + (out / "baseline.json").string() +
                              "\" --output \"" + (out / "scores.json").string() + "\"")
              .code == 0);

  const auto via_model = run_cli(dir.path, "eval" + manifests + " --model \"" + (out / "baseline.json").string() +
                                             "\"" + truth_arg + " --output \"" + (out / "m1.json").string() + "\"");
  CHECK(via_model.code == 0);
  CHECK(via_model.out.find("recognition rate") != std::string::npos);
  const auto via_scores = run_cli(dir.path, "eval" + manifests + " --scores \"" + (out / "scores.json").string() +
                                              "\"" + truth_arg + " --output \"" + (out / "m2.json").string() + "\"");
  CHECK(via_scores.code == 0);
  CHECK(slurp(out / "m1.json") == slurp(out / "m2.json"));
  const auto metrics = nlohmann::json::parse(slurp(out / "m1.json"));
  CHECK(metrics["recognition_rate"].get<double>() >= 0.5);
  CHECK(metrics.contains("mean_jaccard"));
  CHECK(metrics["per_sequence"].size() == 4);

  CHECK(run_cli(dir.path, "eval" + manifests + truth_arg).code == 1);
  CHECK(run_cli(dir.path, "eval" + manifests + " --model a --scores b" + truth_arg).code == 1);
}
