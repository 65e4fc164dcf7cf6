#include "emoseq/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "emoseq/error.hpp"
#include "io_util.hpp"

namespace emoseq {
namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    std::string_view cell = line.substr(begin, comma == std::string_view::npos ? std::string_view::npos : comma - begin);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    begin = comma + 1;
  }
  return out;
}

std::string where(std::size_t line, const std::string& column) {
  return "line " + std::to_string(line) + ", column '" + column + "'";
}

double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::Parse, where(line, column) + ": '" + cell + "' is not a number");
  }
  return v;
}

constexpr std::array<std::string_view, 5> kRequired = {"utterance_id", "label", "arousal", "valence", "split"};

}  // namespace

std::size_t emotion_index(std::string_view label) {
  for (std::size_t k = 0; k < kEmotionLabels.size(); ++k) {
    if (kEmotionLabels[k] == label) return k;
  }
  throw Error(ErrorKind::InvalidLabel, "unknown emotion '" + std::string(label) + "'");
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "validation") return Split::Validation;
  if (name == "test") return Split::Test;
  throw Error(ErrorKind::Validation, "unknown split '" + std::string(name) + "'");
}

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir, bool check_files) {
  std::vector<std::string> lines;
  {
    std::string s(text);
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  std::size_t header_line = 0;
  while (header_line < lines.size() && split_csv_line(lines[header_line]) == std::vector<std::string>{""}) ++header_line;
  if (header_line == lines.size()) throw Error(ErrorKind::Parse, "manifest is empty");

  const auto header = split_csv_line(lines[header_line]);
  std::array<std::size_t, kRequired.size()> col{};
  for (std::size_t r = 0; r < kRequired.size(); ++r) {
    const auto it = std::find(header.begin(), header.end(), kRequired[r]);
    if (it == header.end()) throw Error(ErrorKind::Parse, "manifest header lacks column '" + std::string(kRequired[r]) + "'");
    col[r] = static_cast<std::size_t>(it - header.begin());
  }
  Manifest m;
  std::vector<std::size_t> modality_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(kRequired.begin(), kRequired.end(), header[c]) != kRequired.end()) continue;
    if (header[c].empty()) throw Error(ErrorKind::Parse, "empty column name in manifest header");
    if (std::find(m.modalities.begin(), m.modalities.end(), header[c]) != m.modalities.end()) {
      throw Error(ErrorKind::Parse, "duplicate column '" + header[c] + "'");
    }
    m.modalities.push_back(header[c]);
    modality_cols.push_back(c);
  }

  std::set<std::string> seen;
  for (std::size_t i = header_line + 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto cells = split_csv_line(lines[i]);
    if (cells.size() == 1 && cells[0].empty()) continue;
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(cells.size()));
    }
    ManifestRow row;
    row.line = line_no;
    row.utterance_id = cells[col[0]];
    if (row.utterance_id.empty()) throw Error(ErrorKind::Validation, where(line_no, "utterance_id") + ": empty id");
    if (!seen.insert(row.utterance_id).second) {
      throw Error(ErrorKind::Validation,
                  where(line_no, "utterance_id") + ": duplicate utterance_id '" + row.utterance_id + "'");
    }
    try {
      row.label = emotion_index(cells[col[1]]);
    } catch (const Error&) {
      throw Error(ErrorKind::InvalidLabel, where(line_no, "label") + ": unknown emotion '" + cells[col[1]] + "'");
    }
    row.arousal = parse_number(cells[col[2]], line_no, "arousal");
    row.valence = parse_number(cells[col[3]], line_no, "valence");
    try {
      row.split = parse_split(cells[col[4]]);
    } catch (const Error&) {
      throw Error(ErrorKind::Validation, where(line_no, "split") + ": unknown split '" + cells[col[4]] + "'");
    }
    bool any = false;
    for (std::size_t k = 0; k < modality_cols.size(); ++k) {
      const std::string& cell = cells[modality_cols[k]];
      if (cell.empty()) {
        row.sources.emplace_back();
        continue;
      }
      std::filesystem::path p(cell);
      if (p.is_relative()) p = base_dir / p;
      if (check_files && !std::filesystem::exists(p)) {
        throw Error(ErrorKind::Io, where(line_no, m.modalities[k]) + ": missing file " + p.string());
      }
      row.sources.emplace_back(std::move(p));
      any = true;
    }
    if (!any && !modality_cols.empty()) {
      throw Error(ErrorKind::Validation, "line " + std::to_string(line_no) + ": no modality source given");
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string text(bytes.begin(), bytes.end());
  return parse_manifest(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string manifest_csv(const Manifest& m, const std::filesystem::path& base_dir) {
  std::ostringstream out;
  out << "utterance_id,label,arousal,valence,split";
  for (const auto& mod : m.modalities) out << ',' << mod;
  out << '\n';
  char num[64];
  for (const auto& row : m.rows) {
    out << row.utterance_id << ',' << kEmotionLabels[row.label];
    std::snprintf(num, sizeof num, ",%.6f,%.6f,", row.arousal, row.valence);
    out << num << to_string(row.split);
    for (const auto& src : row.sources) {
      out << ',';
      if (src) out << src->lexically_relative(base_dir).generic_string();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace emoseq
