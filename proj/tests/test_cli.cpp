#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>

#include "emoseq/error.hpp"
#include "emoseq/manifest.hpp"
#include "emoseq/tensor_io.hpp"
#include "emoseq/wav.hpp"

using namespace emoseq;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = EMOSEQ_TEST_TMP;

fs::path fresh(const std::string& name) {
  const fs::path p = kTmp / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the CLI, capturing stdout+stderr into *output. Returns the exit code.
int run(const std::string& args, std::string* output = nullptr) {
  fs::create_directories(kTmp);
  const fs::path log = kTmp / "last_run.log";
  const std::string cmd = std::string("\"") + EMOSEQ_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (output != nullptr) {
    std::ifstream in(log);
    *output = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = b / fs::relative(entry.path(), a);
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) return false;
    ++files;
  }
  return files > 0;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("manifest loading") {
  const fs::path dir = fresh("manifest");
  spit(dir / "a.wav", "");
  spit(dir / "b.wav", "");
  const std::string good =
      "utterance_id,audio,label,arousal,valence,split\n"
      "u1,a.wav,happy,0.5,0.2,train\n"
      "u2,b.wav,sad,0.1,-0.4,validation\n"
      "u3,a.wav,anger,0.9,-0.7,test\n";
  const Manifest m = parse_manifest(good, dir);
  REQUIRE(m.rows.size() == 3);
  CHECK(m.modalities == std::vector<std::string>{"audio"});
  CHECK(m.rows[1].label == emotion_index("sad"));
  CHECK(m.rows[2].split == Split::Test);
  CHECK(m.rows[0].sources[0] == dir / "a.wav");

  auto error_of = [&](const std::string& text) -> std::pair<ErrorKind, std::string> {
    try {
      parse_manifest(text, dir);
    } catch (const Error& e) {
      return {e.kind(), e.what()};
    }
    return {ErrorKind::Usage, ""};
  };
  {
    const auto [kind, msg] = error_of(good + "u2,a.wav,fear,0.3,0.1,train\n");
    CHECK(kind == ErrorKind::Validation);
    CHECK(msg.find("line 5") != std::string::npos);
  }
  {
    const auto [kind, msg] = error_of("utterance_id,audio,label,arousal,valence,split\nu1,a.wav,happy,high,0.2,train\n");
    CHECK(kind == ErrorKind::Parse);
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("arousal") != std::string::npos);
  }
  CHECK(error_of("utterance_id,audio,label,arousal,valence,split\nu1,a.wav,bored,0,0,train\n").first ==
        ErrorKind::InvalidLabel);
  CHECK(error_of("utterance_id,audio,label,arousal,valence,split\nu1,zz.wav,sad,0,0,train\n").first == ErrorKind::Io);
  CHECK(error_of("utterance_id,audio,label,valence,split\n").first == ErrorKind::Parse);
}

TEST_CASE("synth is byte-identical for a fixed seed") {
  const fs::path a = fresh("synth_a"), b = fresh("synth_b");
  for (const std::string kind : {"separable_tones", "complementary_modalities"}) {
    REQUIRE(run("synth --kind " + kind + " --n 8 --seed 4 --out " + q(a / kind)) == 0);
    REQUIRE(run("synth --kind " + kind + " --n 8 --seed 4 --out " + q(b / kind)) == 0);
    CHECK(same_tree(a / kind, b / kind));
    CHECK(load_manifest(a / kind / "manifest.csv").rows.size() == 8);
  }
  REQUIRE(run("synth --kind separable_tones --n 8 --seed 5 --out " + q(b / "other")) == 0);
  CHECK_FALSE(same_tree(a / "separable_tones", b / "other"));
}

TEST_CASE("eval scores perfect predictions as 1.0") {
  const fs::path dir = fresh("eval_perfect");
  std::string manifest = "utterance_id,audio,label,arousal,valence,split\n";
  std::string preds = "utterance_id,p_anger,p_disgust,p_fear,p_happy,p_neutral,p_sad,p_surprise,predicted,arousal,valence\n";
  const char* labels[] = {"anger", "happy", "sad", "happy"};
  spit(dir / "x.wav", "");
  for (int i = 0; i < 4; ++i) {
    manifest += "u" + std::to_string(i) + ",x.wav," + labels[i] + ",0.5,0.25,test\n";
    const std::size_t k = emotion_index(labels[i]);
    preds += "u" + std::to_string(i);
    for (std::size_t c = 0; c < 7; ++c) preds += c == k ? ",1" : ",0";
    preds += std::string(",") + labels[i] + ",0.5,0.25\n";
  }
  spit(dir / "manifest.csv", manifest);
  spit(dir / "preds.csv", preds);
  REQUIRE(run("eval --manifest " + q(dir / "manifest.csv") + " --predictions-in " + q(dir / "preds.csv") +
              " --metrics " + q(dir / "m.json")) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "m.json"));
  CHECK(j["unweighted_accuracy"] == 1.0);
  CHECK(j["macro_f1"].get<double>() < 1.0);  // classes never seen score 0
  CHECK(j["mse_arousal"] == 0.0);
  CHECK(j["confusion"][3][3] == 2);
}

TEST_CASE("decode prints the forced labeling") {
  const fs::path dir = fresh("decode");
  // Columns anger..surprise then blank; path: blank, sad, sad, blank.
  auto row = [](std::size_t hot) {
    std::string r;
    for (std::size_t c = 0; c < 8; ++c) r += std::string(c ? "," : "") + (c == hot ? "1" : "0");
    return r + "\n";
  };
  spit(dir / "y.csv", row(7) + row(5) + row(5) + row(7));
  std::string out;
  REQUIRE(run("decode --posteriors " + q(dir / "y.csv"), &out) == 0);
  CHECK(out.find("best_path: - sad sad -") != std::string::npos);
  CHECK(out.find("best_label: sad") != std::string::npos);
  CHECK(out.find("constrained: sad 1") != std::string::npos);

  spit(dir / "h.csv", "x,y,-\n0,1,0\n1,0,0\n");
  REQUIRE(run("decode --in " + q(dir / "h.csv"), &out) == 0);
  CHECK(out.find("best_label: y x") != std::string::npos);

  spit(dir / "bad.csv", "0.5,0.4\n");
  CHECK(run("decode --posteriors " + q(dir / "bad.csv")) == 2);
}

TEST_CASE("frames writes a tensor") {
  const fs::path dir = fresh("frames");
  WaveForm w;
  w.sample_rate = 16000;
  for (std::size_t n = 0; n < 32000; ++n) w.samples.push_back(0.4 * std::sin(2 * std::numbers::pi * 440.0 * n / 16000.0));
  write_wav(dir / "tone.wav", w);
  REQUIRE(run("frames --in " + q(dir / "tone.wav") + " --out " + q(dir / "tone.emsq") + " --dump-csv") == 0);
  const FrameTensor t = read_tensor(dir / "tone.emsq");
  CHECK(t.count == 8);
  CHECK(t.channels == 3);
  CHECK(t.rows == 40);
  CHECK(t.cols == 40);
  CHECK(fs::exists(dir / "tone.emsq.csv"));
}

TEST_CASE("exit codes and no partial outputs") {
  const fs::path dir = fresh("exits");
  CHECK(run("") == 1);
  CHECK(run("train --bogus") == 1);
  CHECK(run("synth --out " + q(dir / "s") + " --n 0") == 1);
  spit(dir / "bad.cfg", "not_an_option = 3\n");
  CHECK(run("synth --config " + q(dir / "bad.cfg") + " --out " + q(dir / "s")) == 1);

  CHECK(run("train --manifest " + q(dir / "missing.csv") + " --out " + q(dir / "m.ckpt")) == 2);
  CHECK_FALSE(fs::exists(dir / "m.ckpt"));

  spit(dir / "junk.wav", "not a wav file at all");
  CHECK(run("frames --in " + q(dir / "junk.wav") + " --out " + q(dir / "junk.emsq")) == 2);
  CHECK_FALSE(fs::exists(dir / "junk.emsq"));

  // Non-finite embeddings make the CTC loss fail numerically.
  FrameTensor t;
  t.count = 4;
  t.channels = 1;
  t.rows = 1;
  t.cols = 3;
  t.values.assign(12, std::nanf(""));
  write_tensor(dir / "nan.emsq", t);
  spit(dir / "nan.csv", "utterance_id,emb,label,arousal,valence,split\nu1,nan.emsq,happy,0.5,0,train\n");
  CHECK(run("train --manifest " + q(dir / "nan.csv") + " --out " + q(dir / "nan.ckpt") +
            " --loss-mode ctc --epochs 1") == 3);
  CHECK_FALSE(fs::exists(dir / "nan.ckpt"));
  CHECK_FALSE(fs::exists(dir / "nan.ckpt.loss.csv"));

  spit(dir / "dup.csv", "utterance_id,emb,label,arousal,valence,split\nu1,nan.emsq,happy,0.5,0,test\nu1,nan.emsq,sad,0.5,0,test\n");
  std::string out;
  CHECK(run("eval --manifest " + q(dir / "dup.csv") + " --predictions-in " + q(dir / "dup.csv") + " --metrics " +
                q(dir / "m.json"),
            &out) == 2);
  CHECK(out.find("line 3") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "m.json"));
  for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("train and eval are reproducible") {
  const fs::path dir = fresh("repro");
  REQUIRE(run("synth --kind separable_tones --n 6 --seed 2 --test-fraction 0.5 --out " + q(dir / "ds")) == 0);
  spit(dir / "run.cfg", "manifest = " + (dir / "ds" / "manifest.csv").string() + "\nepochs = 2\nlearning_rate = 0.1\n");
  for (const char* name : {"a", "b"}) {
    const fs::path ck = dir / (std::string(name) + ".ckpt");
    REQUIRE(run("train --config " + q(dir / "run.cfg") + " --out " + q(ck)) == 0);
    REQUIRE(run("eval --manifest " + q(dir / "ds" / "manifest.csv") + " --checkpoint " + q(ck) + " --metrics " +
                q(dir / (std::string(name) + ".json")) + " --predictions " + q(dir / (std::string(name) + ".csv"))) == 0);
  }
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(slurp(dir / "a.ckpt.loss.csv") == slurp(dir / "b.ckpt.loss.csv"));
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  // Command-line flags override the config file.
  REQUIRE(run("train --config " + q(dir / "run.cfg") + " --epochs 3 --out " + q(dir / "c.ckpt")) == 0);
  const std::string trace = slurp(dir / "c.ckpt.loss.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);

  const auto j = nlohmann::json::parse(slurp(dir / "a.json"));
  CHECK(j.contains("unweighted_accuracy"));
  CHECK(slurp(dir / "a.csv").rfind("utterance_id,p_anger,", 0) == 0);
  // Scoring the written predictions reproduces the report.
  REQUIRE(run("eval --manifest " + q(dir / "ds" / "manifest.csv") + " --predictions-in " + q(dir / "a.csv") +
              " --metrics " + q(dir / "rescored.json")) == 0);
  CHECK(slurp(dir / "rescored.json") == slurp(dir / "a.json"));
}
