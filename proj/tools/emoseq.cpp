// emoseq: frame extraction, training, evaluation, CTC decoding and synthetic
// data generation for framewise multimodal emotion recognition.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "emoseq/error.hpp"
#include "emoseq/pipeline.hpp"
#include "emoseq/synth.hpp"

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw emoseq::Error(emoseq::ErrorKind::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw emoseq::Error(emoseq::ErrorKind::Io, "cannot write " + tmp);
    out << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw emoseq::Error(emoseq::ErrorKind::Io, "cannot rename into " + path);
  }
}

// Reads flat "key = value" files and files the keys under the subcommand
// being run, so a config needs no [section] headers.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(std::string section) : section_(std::move(section)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") item.parents = {section_};
    }
    return items;
  }

 private:
  std::string section_;
};

// Options shared by train and eval; both dash and underscore spellings so
// config files can use either.
struct ModelOptions {
  std::string loss_mode = "framewise_ce";
  std::string fusion = "joint";
  std::string split = "test";
};

void add_model_options(CLI::App* cmd, emoseq::pipeline::RunConfig& rc, ModelOptions& mo) {
  cmd->add_option("--modalities", rc.modalities, "Manifest modality columns to use (default: all)")->delimiter(',');
  cmd->add_option("--loss-mode,--loss_mode", mo.loss_mode, "framewise_ce or ctc")
      ->check(CLI::IsMember({"framewise_ce", "ctc"}));
  cmd->add_option("--learning-rate,--learning_rate", rc.train.learning_rate)->check(CLI::NonNegativeNumber);
  cmd->add_option("--epochs", rc.train.epochs);
  cmd->add_option("--batch-size,--batch_size", rc.train.batch_size)->check(CLI::PositiveNumber);
  cmd->add_option("--seed", rc.train.seed);
  cmd->add_option("--regression-weight,--regression_weight", rc.train.regression_weight)
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--hidden", rc.hidden)->check(CLI::PositiveNumber);
  cmd->add_option("--embed-dim,--embed_dim", rc.embed_dim)->check(CLI::PositiveNumber);
  cmd->add_option("--conv1-channels,--conv1_channels", rc.conv1_channels)->check(CLI::PositiveNumber);
  cmd->add_option("--conv2-channels,--conv2_channels", rc.conv2_channels)->check(CLI::PositiveNumber);
  cmd->add_option("--fusion", mo.fusion, "joint or frozen branch training")->check(CLI::IsMember({"joint", "frozen"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Framewise multimodal emotion recognition"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat 'key = value' config file; flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);

  namespace pl = emoseq::pipeline;
  pl::RunConfig rc;
  ModelOptions mo;

  std::string in_path, out_path;
  bool dump_csv = false;
  auto* frames = app.add_subcommand("frames", "Extract 3x40x40 spectrogram frames from a WAV file");
  frames->add_option("--in", in_path, "Input WAV")->required();
  frames->add_option("--out", out_path, "Output EMSQ1 tensor")->required();
  frames->add_flag("--dump-csv,--dump_csv", dump_csv, "Also write <out>.csv");

  auto* train = app.add_subcommand("train", "Train a model from a manifest");
  train->add_option("--manifest", rc.manifest)->required();
  train->add_option("--out,--checkpoint", rc.checkpoint, "Checkpoint to write")->required();
  add_model_options(train, rc, mo);

  std::string metrics_path, predictions_out, predictions_in;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint, or score a predictions CSV");
  eval->add_option("--manifest", rc.manifest)->required();
  auto* ckpt_opt = eval->add_option("--checkpoint", rc.checkpoint);
  auto* pin_opt = eval->add_option("--predictions-in,--predictions_in", predictions_in, "Score this CSV instead");
  ckpt_opt->excludes(pin_opt);
  eval->add_option("--split", mo.split)->check(CLI::IsMember({"train", "validation", "test"}));
  eval->add_option("--modalities", rc.modalities)->delimiter(',');
  eval->add_option("--metrics", metrics_path, "Metrics JSON output (default: stdout)");
  eval->add_option("--predictions", predictions_out, "Predictions CSV output");

  std::string posterior_path;
  long blank = -1;
  auto* decode = app.add_subcommand("decode", "Decode a posterior matrix CSV");
  decode->add_option("--posteriors,--in", posterior_path)->required();
  decode->add_option("--blank", blank, "Blank column index (default: last)");

  emoseq::SynthOptions so;
  std::string kind = "separable_tones", synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
  synth->add_option("--kind", kind)->check(CLI::IsMember({"separable_tones", "complementary_modalities"}));
  synth->add_option("--n,--count", so.count)->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed);
  synth->add_option("--classes", so.classes)->check(CLI::Range(1, 7));
  synth->add_option("--test-fraction,--test_fraction", so.test_fraction)->check(CLI::Range(0.0, 0.99));
  synth->add_option("--out", synth_out)->required();

  // Config keys belong to whichever subcommand is named on the command line.
  for (int i = 1; i < argc; ++i) {
    if (app.get_subcommand_no_throw(argv[i]) != nullptr) {
      app.config_formatter(std::make_shared<FlatConfig>(argv[i]));
      break;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    rc.train.loss_mode = emoseq::model::parse_loss_mode(mo.loss_mode);
    rc.fusion_joint = mo.fusion == "joint";
    rc.split = emoseq::parse_split(mo.split);

    if (frames->parsed()) {
      const auto n = pl::run_frames(in_path, out_path, dump_csv);
      std::cout << "wrote " << n << " frames to " << out_path << "\n";
    } else if (train->parsed()) {
      const auto summary = pl::run_train(rc);
      std::cout << "epochs: " << summary.loss_trace.size() << "\n";
      if (!summary.loss_trace.empty()) {
        std::cout << "loss: " << summary.loss_trace.front() << " -> " << summary.loss_trace.back() << "\n";
      }
      std::cout << "train unweighted accuracy: " << summary.train_unweighted_accuracy << "\n";
    } else if (eval->parsed()) {
      std::string json;
      if (!predictions_in.empty()) {
        json = emoseq::metrics::to_json(
            pl::score_predictions(emoseq::load_manifest(rc.manifest), read_text(predictions_in)));
      } else {
        if (rc.checkpoint.empty()) throw emoseq::Error(emoseq::ErrorKind::Usage, "eval needs --checkpoint or --predictions-in");
        const auto out = pl::run_eval(rc);
        json = emoseq::metrics::to_json(out.report);
        if (!predictions_out.empty()) write_text(predictions_out, out.predictions_csv);
      }
      if (metrics_path.empty()) {
        std::cout << json;
      } else {
        write_text(metrics_path, json);
      }
    } else if (decode->parsed()) {
      pl::DecodeOptions opts;
      if (blank >= 0) opts.blank = static_cast<std::size_t>(blank);
      std::cout << pl::run_decode(read_text(posterior_path), opts);
    } else if (synth->parsed()) {
      so.kind = emoseq::parse_synth_kind(kind);
      if (so.kind == emoseq::SynthKind::ComplementaryModalities) so.classes = 4;
      const auto manifest = emoseq::generate_synthetic(so, synth_out);
      std::cout << "wrote " << manifest.rows.size() << " utterances to " << synth_out << "/manifest.csv\n";
    }
  } catch (const emoseq::Error& e) {
    std::cerr << "emoseq: " << e.what() << "\n";
    return emoseq::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "emoseq: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
