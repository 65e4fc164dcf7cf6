#include "emoseq/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "emoseq/error.hpp"
#include "emoseq/frames.hpp"
#include "emoseq/tensor_io.hpp"
#include "emoseq/wav.hpp"
#include "io_util.hpp"

namespace emoseq::pipeline {
namespace {

struct ModalityInput {
  model::Sequence steps;
  bool spectro = false;
};

ModalityInput load_source(const std::filesystem::path& path, const std::string& utterance_id) {
  ModalityInput in;
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".wav") {
    const WaveForm wave = read_wav(path);
    try {
      const FrameSequence frames = extract_frames(wave);
      for (const auto& f : frames.frames) in.steps.push_back(f.flatten());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::TooShort) {
        throw Error(ErrorKind::TooShort, "utterance '" + utterance_id + "' is shorter than one 0.4 s frame");
      }
      throw;
    }
    in.spectro = true;
    return in;
  }
  const FrameTensor t = read_tensor(path);
  if (t.count == 0) throw Error(ErrorKind::TooShort, "utterance '" + utterance_id + "' has no frames");
  in.steps = t.steps();
  in.spectro = t.is_spectro_frames();
  return in;
}

std::vector<std::size_t> modality_columns(const Manifest& m, const std::vector<std::string>& wanted) {
  std::vector<std::size_t> cols;
  if (wanted.empty()) {
    for (std::size_t i = 0; i < m.modalities.size(); ++i) cols.push_back(i);
  } else {
    for (const auto& name : wanted) {
      const auto it = std::find(m.modalities.begin(), m.modalities.end(), name);
      if (it == m.modalities.end()) throw Error(ErrorKind::Usage, "manifest has no modality '" + name + "'");
      cols.push_back(static_cast<std::size_t>(it - m.modalities.begin()));
    }
  }
  if (cols.empty()) throw Error(ErrorKind::Usage, "no modalities selected");
  return cols;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

model::ModelShape shape_for(const RunConfig& c, const LoadedData& d, std::size_t modality, model::LossMode mode) {
  model::ModelShape s;
  s.use_encoder = d.spectro[modality];
  s.conv1_channels = c.conv1_channels;
  s.conv2_channels = c.conv2_channels;
  s.embed_dim = s.use_encoder ? c.embed_dim : d.step_sizes[modality];
  s.hidden = c.hidden;
  s.num_classes = kEmotionCount;
  s.loss_mode = mode;
  return s;
}

std::vector<Example> single_examples(const LoadedData& d, std::size_t modality) {
  std::vector<Example> out;
  for (const auto& u : d.utterances) {
    if (!u.inputs[modality]) continue;
    const auto& steps = *u.inputs[modality];
    for (const auto& [b, e] : interval_spans(steps.size())) {
      Example ex;
      ex.input.assign(steps.begin() + static_cast<std::ptrdiff_t>(b), steps.begin() + static_cast<std::ptrdiff_t>(e));
      ex.label = u.label;
      ex.arousal = u.arousal;
      ex.valence = u.valence;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<fusion::FusionExample> fusion_examples(const LoadedData& d) {
  std::vector<fusion::FusionExample> out;
  for (const auto& u : d.utterances) {
    for (auto& inputs : utterance_intervals(u)) {
      fusion::FusionExample ex;
      ex.inputs = std::move(inputs);
      ex.label = u.label;
      ex.arousal = u.arousal;
      ex.valence = u.valence;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void check_compatible(const model::ModelShape& shape, const LoadedData& d, std::size_t modality) {
  if (shape.use_encoder != d.spectro[modality] || shape.input_size() != d.step_sizes[modality]) {
    throw Error(ErrorKind::Dimension, "modality '" + d.modalities[modality] + "' does not match the checkpoint");
  }
}

}  // namespace

LoadedData load_data(const Manifest& manifest, const std::vector<std::string>& modalities, std::optional<Split> split) {
  const auto cols = modality_columns(manifest, modalities);
  std::vector<const ManifestRow*> rows;
  for (const auto& r : manifest.rows) {
    if (!split || r.split == *split) rows.push_back(&r);
  }
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->utterance_id < b->utterance_id; });

  LoadedData d;
  for (std::size_t c : cols) d.modalities.push_back(manifest.modalities[c]);
  d.utterances.resize(rows.size());
  std::vector<std::vector<std::optional<bool>>> spectro(rows.size(), std::vector<std::optional<bool>>(cols.size()));
  std::vector<std::exception_ptr> errors(rows.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const ManifestRow& row = *rows[k];
      Utterance& u = d.utterances[k];
      u.id = row.utterance_id;
      u.label = row.label;
      u.arousal = row.arousal;
      u.valence = row.valence;
      for (std::size_t m = 0; m < cols.size(); ++m) {
        const auto& src = row.sources[cols[m]];
        if (!src) {
          u.inputs.emplace_back();
          continue;
        }
        ModalityInput in = load_source(*src, row.utterance_id);
        spectro[k][m] = in.spectro;
        u.inputs.emplace_back(std::move(in.steps));
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  d.spectro.assign(cols.size(), false);
  d.step_sizes.assign(cols.size(), 0);
  for (std::size_t m = 0; m < cols.size(); ++m) {
    bool seen = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (!spectro[k][m]) continue;
      const std::size_t size = d.utterances[k].inputs[m]->front().size();
      if (!seen) {
        d.spectro[m] = *spectro[k][m];
        d.step_sizes[m] = size;
        seen = true;
      } else if (d.spectro[m] != *spectro[k][m] || d.step_sizes[m] != size) {
        throw Error(ErrorKind::Dimension, "modality '" + d.modalities[m] + "' mixes input shapes (utterance '" +
                                              d.utterances[k].id + "')");
      }
    }
  }
  return d;
}

std::vector<std::vector<std::optional<model::Sequence>>> utterance_intervals(const Utterance& u) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> spans;
  std::size_t count = 0;
  for (const auto& in : u.inputs) {
    spans.push_back(in ? interval_spans(in->size()) : std::vector<std::pair<std::size_t, std::size_t>>{});
    count = std::max(count, spans.back().size());
  }
  std::vector<std::vector<std::optional<model::Sequence>>> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t m = 0; m < u.inputs.size(); ++m) {
      if (i < spans[m].size()) {
        const auto [b, e] = spans[m][i];
        const auto& steps = *u.inputs[m];
        out[i].emplace_back(model::Sequence(steps.begin() + static_cast<std::ptrdiff_t>(b),
                                            steps.begin() + static_cast<std::ptrdiff_t>(e)));
      } else {
        out[i].emplace_back();
      }
    }
  }
  return out;
}

fusion::UtterancePrediction predict_utterance(const Checkpoint& checkpoint, const Utterance& u) {
  std::vector<fusion::IntervalOutput> outputs;
  if (const auto* seq = std::get_if<model::SeqParams>(&checkpoint.model)) {
    for (const auto& inputs : utterance_intervals(u)) {
      if (!inputs.front()) continue;
      const IntervalPrediction p = predict_interval(*seq, *inputs.front());
      outputs.push_back({p.class_probs, p.arousal, p.valence});
    }
  } else {
    const auto& fm = std::get<fusion::FusionModel>(checkpoint.model);
    for (const auto& inputs : utterance_intervals(u)) outputs.push_back(fusion::predict_fused(fm, inputs));
  }
  if (outputs.empty()) {
    throw Error(ErrorKind::TooShort, "utterance '" + u.id + "' has no complete interval (needs at least 2 frames)");
  }
  return fusion::aggregate_utterance(outputs);
}

std::string predictions_header() {
  std::string h = "utterance_id";
  for (auto label : kEmotionLabels) h += ",p_" + std::string(label);
  return h + ",predicted,arousal,valence\n";
}

EvalOutputs evaluate(const Checkpoint& checkpoint, const LoadedData& data) {
  if (data.utterances.empty()) throw Error(ErrorKind::EmptyInput, "no utterances to evaluate");
  if (const auto* seq = std::get_if<model::SeqParams>(&checkpoint.model)) {
    if (data.modalities.size() != 1) throw Error(ErrorKind::Usage, "sequence checkpoint expects one modality");
    check_compatible(seq->shape, data, 0);
  } else {
    const auto& fm = std::get<fusion::FusionModel>(checkpoint.model);
    if (fm.modalities != data.modalities) throw Error(ErrorKind::Usage, "modalities differ from the checkpoint");
    for (std::size_t m = 0; m < fm.branches.size(); ++m) check_compatible(fm.branches[m].shape, data, m);
  }

  std::vector<fusion::UtterancePrediction> preds(data.utterances.size());
  std::vector<std::exception_ptr> errors(preds.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(preds.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      preds[k] = predict_utterance(checkpoint, data.utterances[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalOutputs out;
  out.predictions_csv = predictions_header();
  metrics::ConfusionMatrix cm(kEmotionCount);
  std::vector<double> pa, ta, pv, tv;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto& u = data.utterances[k];
    const auto& p = preds[k];
    cm.add(u.label, p.predicted_class);
    pa.push_back(p.arousal);
    ta.push_back(u.arousal);
    pv.push_back(p.valence);
    tv.push_back(u.valence);
    out.predictions_csv += u.id;
    for (double v : p.class_probs) out.predictions_csv += "," + format_double(v);
    out.predictions_csv += "," + std::string(kEmotionLabels[p.predicted_class]) + "," + format_double(p.arousal) +
                           "," + format_double(p.valence) + "\n";
  }
  out.report.unweighted_accuracy = metrics::unweighted_accuracy(cm);
  out.report.macro_f1 = metrics::macro_f1(cm);
  out.report.mse_arousal = metrics::mse(pa, ta);
  out.report.mse_valence = metrics::mse(pv, tv);
  out.report.confusion = cm;
  return out;
}

EvalOutputs run_eval(const RunConfig& config) {
  const Checkpoint checkpoint = load_checkpoint(config.checkpoint);
  const Manifest manifest = load_manifest(config.manifest);
  std::vector<std::string> modalities = config.modalities;
  if (modalities.empty()) {
    if (const auto* fm = std::get_if<fusion::FusionModel>(&checkpoint.model)) {
      modalities = fm->modalities;
    } else {
      modalities = {checkpoint.modality};
    }
  }
  return evaluate(checkpoint, load_data(manifest, modalities, config.split));
}

TrainSummary run_train(const RunConfig& config) {
  validate(config.train);
  const Manifest manifest = load_manifest(config.manifest);
  const LoadedData data = load_data(manifest, config.modalities, Split::Train);
  if (data.utterances.empty()) throw Error(ErrorKind::EmptyInput, "manifest has no training utterances");

  Checkpoint checkpoint;
  TrainSummary summary;
  if (data.modalities.size() == 1) {
    const auto shape = shape_for(config, data, 0, config.train.loss_mode);
    auto result = train(config.train, shape, single_examples(data, 0));
    checkpoint.modality = data.modalities.front();
    checkpoint.model = std::move(result.params);
    summary.loss_trace = std::move(result.loss_trace);
  } else {
    std::vector<model::ModelShape> shapes;
    for (std::size_t m = 0; m < data.modalities.size(); ++m) {
      shapes.push_back(shape_for(config, data, m, model::LossMode::FramewiseCe));
    }
    fusion::FusionModel fm = fusion::init_fusion(data.modalities, shapes, kEmotionCount, config.train.seed);
    if (!config.fusion_joint) {
      for (std::size_t m = 0; m < data.modalities.size(); ++m) {
        const auto shape = shape_for(config, data, m, config.train.loss_mode);
        TrainConfig tc = config.train;
        const auto examples = single_examples(data, m);
        if (examples.empty()) continue;
        auto branch = train(tc, model::init_params(shape, config.train.seed + m + 1), examples).params;
        branch.shape.loss_mode = model::LossMode::FramewiseCe;
        // Only the encoder and LSTM carry over; the branch head is unused.
        fm.branches[m].encoder = std::move(branch.encoder);
        fm.branches[m].lstm = std::move(branch.lstm);
      }
    }
    fusion::FusionConfig fc;
    fc.learning_rate = config.train.learning_rate;
    fc.epochs = config.train.epochs;
    fc.batch_size = config.train.batch_size;
    fc.seed = config.train.seed;
    fc.regression_weight = config.train.regression_weight;
    fc.train_branches = config.fusion_joint;
    auto result = fusion::train_fusion(fc, std::move(fm), fusion_examples(data));
    checkpoint.model = std::move(result.model);
    summary.loss_trace = std::move(result.loss_trace);
  }

  // The saved model is float32; score what was saved.
  const auto bytes = encode_checkpoint(checkpoint);
  const Checkpoint saved = decode_checkpoint(bytes);
  summary.train_unweighted_accuracy = evaluate(saved, data).report.unweighted_accuracy;

  std::string trace = "epoch,loss\n";
  for (std::size_t e = 0; e < summary.loss_trace.size(); ++e) {
    trace += std::to_string(e) + "," + format_double(summary.loss_trace[e]) + "\n";
  }
  auto trace_path = config.checkpoint;
  trace_path += ".loss.csv";
  detail::write_text_atomic(trace_path, trace);
  detail::write_file_atomic(config.checkpoint, bytes);
  return summary;
}

metrics::Report score_predictions(const Manifest& manifest, const std::string& predictions_csv) {
  std::map<std::string, const ManifestRow*> rows;
  for (const auto& r : manifest.rows) rows[r.utterance_id] = &r;

  std::istringstream in(predictions_csv);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "predictions file is empty");
  metrics::ConfusionMatrix cm(kEmotionCount);
  std::vector<double> pa, ta, pv, tv;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 1 + kEmotionCount + 3) {
      throw Error(ErrorKind::Parse, "predictions line " + std::to_string(line_no) + ": wrong field count");
    }
    const auto it = rows.find(cells[0]);
    if (it == rows.end()) {
      throw Error(ErrorKind::Validation, "predictions line " + std::to_string(line_no) + ": unknown utterance '" +
                                             cells[0] + "'");
    }
    auto number = [&](const std::string& s, const char* column) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(ErrorKind::Parse, "predictions line " + std::to_string(line_no) + ", column '" + column +
                                          "': not a number");
      }
      return v;
    };
    cm.add(it->second->label, emotion_index(cells[1 + kEmotionCount]));
    pa.push_back(number(cells[2 + kEmotionCount], "arousal"));
    pv.push_back(number(cells[3 + kEmotionCount], "valence"));
    ta.push_back(it->second->arousal);
    tv.push_back(it->second->valence);
  }
  metrics::Report r;
  r.unweighted_accuracy = metrics::unweighted_accuracy(cm);
  r.macro_f1 = metrics::macro_f1(cm);
  r.mse_arousal = metrics::mse(pa, ta);
  r.mse_valence = metrics::mse(pv, tv);
  r.confusion = cm;
  return r;
}

std::size_t run_frames(const std::filesystem::path& wav, const std::filesystem::path& out, bool dump_csv) {
  const FrameSequence frames = extract_frames(read_wav(wav));
  if (dump_csv) {
    auto csv = out;
    csv += ".csv";
    detail::write_text_atomic(csv, frames_csv(frames));
  }
  write_tensor(out, to_tensor(frames));
  return frames.frames.size();
}

std::string run_decode(const std::string& posterior_csv, const DecodeOptions& options) {
  std::istringstream in(posterior_csv);
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    std::vector<double> values;
    bool numeric = true;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && header.empty()) {
        header = cells;
        continue;
      }
      throw Error(ErrorKind::Parse, "posterior line " + std::to_string(line_no) + " is not numeric");
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw Error(ErrorKind::Parse, "posterior line " + std::to_string(line_no) + " has a different width");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyInput, "posterior file has no rows");
  const std::size_t n = rows.front().size();
  if (!header.empty() && header.size() != n) throw Error(ErrorKind::Parse, "header width differs from rows");
  const std::size_t blank = options.blank.value_or(n - 1);
  if (blank >= n) throw Error(ErrorKind::Usage, "blank index out of range");

  std::vector<std::string> symbols = header;
  if (symbols.empty()) {
    for (std::size_t i = 0, e = 0; i < n; ++i) {
      if (i == blank) {
        symbols.push_back("-");
      } else {
        symbols.push_back(n - 1 == kEmotionCount ? std::string(kEmotionLabels[e]) : "c" + std::to_string(e));
        ++e;
      }
    }
  }

  Matrix y(rows.size(), n);
  for (std::size_t t = 0; t < rows.size(); ++t) std::copy(rows[t].begin(), rows[t].end(), y.row(t).begin());
  const ctc::PosteriorMatrix posteriors(std::move(y));
  const auto best = ctc::best_path_decode(posteriors, blank);
  const auto constrained = ctc::constrained_emotion_decode(posteriors, blank);

  std::string out = "best_path:";
  for (auto s : best.path) out += " " + symbols[s];
  out += "\nbest_label:";
  for (auto s : best.label) out += " " + symbols[s];
  out += "\nconstrained: " + symbols[constrained.emotion] + " " + format_double(constrained.probability) + "\n";
  return out;
}

}  // namespace emoseq::pipeline
