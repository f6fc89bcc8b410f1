#include "modan/manifest.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "modan/error.hpp"

namespace modan {

namespace {

const char* const kColumns = "id\tmodality\tanatomy\tclass_id\ttask_label\tfeatures";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + what);
}

std::optional<int> parse_optional_int(const std::string& field, std::size_t line,
                                      const char* name) {
  if (field == "-") return std::nullopt;
  int value = 0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    parse_error(line, std::string("bad ") + name + " '" + field + "'");
  }
  return value;
}

std::vector<double> parse_reals(const std::string& field, std::size_t line) {
  std::vector<double> values;
  for (const auto& tok : split(field, ',')) {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (tok.empty() || ec != std::errc() || ptr != end) {
      parse_error(line, "bad feature value '" + tok + "'");
    }
    values.push_back(v);
  }
  return values;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_optional(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string("-");
}

std::vector<std::string> header_names(const std::string& line, const char* tag,
                                      std::size_t line_no) {
  auto fields = split(line, '\t');
  if (fields.empty() || fields[0] != tag) parse_error(line_no, std::string("expected ") + tag);
  fields.erase(fields.begin());
  return fields;
}

}  // namespace

std::vector<double> read_feature_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open blob " + path.string());
  unsigned char prefix[8];
  if (!in.read(reinterpret_cast<char*>(prefix), 8)) {
    throw Error(ErrorCode::kParseError, "blob " + path.string() + " lacks a length prefix");
  }
  std::uint64_t count = 0;
  for (int i = 7; i >= 0; --i) count = (count << 8) | prefix[i];
  std::vector<double> values(count);
  for (auto& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw Error(ErrorCode::kParseError, "blob " + path.string() + " is truncated");
    }
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
    v = std::bit_cast<double>(bits);
  }
  return values;
}

void write_feature_blob(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write blob " + path.string());
  auto put = [&out](std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  };
  put(values.size());
  for (double v : values) put(std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error(ErrorCode::kIo, "failed writing blob " + path.string());
}

void validate_manifest(const Manifest& manifest) {
  std::set<std::string> ids;
  const std::size_t dim = manifest.feature_dim();
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    const std::string where = "row " + std::to_string(i) + " ('" + row.id + "')";
    if (row.id.empty()) throw Error(ErrorCode::kParseError, where + ": empty id");
    if (!ids.insert(row.id).second) throw Error(ErrorCode::kDuplicateId, where);
    try {
      manifest.vocab.modality_index(row.modality);
      manifest.vocab.anatomy_index(row.anatomy);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnknownName, where + ": " + e.what());
    }
    if (row.features.empty()) throw Error(ErrorCode::kDimensionMismatch, where + ": no features");
    if (row.features.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, where + ": " + std::to_string(row.features.size()) +
                                                     " features, expected " + std::to_string(dim));
    }
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (lines.size() < 4) parse_error(lines.size() + 1, "manifest header is incomplete");

  const auto version = header_names(lines[0], "#modan-manifest", 1);
  if (version.size() != 1 || version[0] != std::to_string(kManifestVersion)) {
    parse_error(1, "unsupported manifest version");
  }
  std::optional<MetadataVocabulary> vocab;
  try {
    vocab.emplace(header_names(lines[1], "#modalities", 2), header_names(lines[2], "#anatomies", 3));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw;
    parse_error(2, e.what());
  }
  if (lines[3] != kColumns) parse_error(4, "unexpected column header");

  Manifest manifest{*vocab, {}};
  std::set<std::string> ids;
  const auto base = path.parent_path();
  for (std::size_t i = 4; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 6) parse_error(line_no, "expected 6 fields, got " + std::to_string(fields.size()));

    ManifestRow row;
    row.id = fields[0];
    row.modality = fields[1];
    row.anatomy = fields[2];
    row.class_id = parse_optional_int(fields[3], line_no, "class_id");
    row.task_label = parse_optional_int(fields[4], line_no, "task_label");
    if (row.task_label && *row.task_label != 0 && *row.task_label != 1) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": task_label must be 0 or 1");
    }
    if (!fields[5].empty() && fields[5][0] == '@') {
      row.blob_path = fields[5].substr(1);
      row.features = read_feature_blob(base / row.blob_path);
    } else {
      row.features = parse_reals(fields[5], line_no);
    }

    const std::string where = "line " + std::to_string(line_no);
    if (row.id.empty()) parse_error(line_no, "empty id");
    if (!ids.insert(row.id).second) {
      throw Error(ErrorCode::kDuplicateId, where + ": id '" + row.id + "'");
    }
    try {
      manifest.vocab.modality_index(row.modality);
      manifest.vocab.anatomy_index(row.anatomy);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUnknownName, where + ": " + e.what());
    }
    if (!manifest.rows.empty() && row.features.size() != manifest.rows.front().features.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  where + ": " + std::to_string(row.features.size()) + " features, expected " +
                      std::to_string(manifest.rows.front().features.size()));
    }
    manifest.rows.push_back(std::move(row));
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  validate_manifest(manifest);
  std::ostringstream out;
  out << "#modan-manifest\t" << kManifestVersion << '\n';
  out << "#modalities";
  for (const auto& m : manifest.vocab.modalities()) out << '\t' << m;
  out << "\n#anatomies";
  for (const auto& a : manifest.vocab.anatomies()) out << '\t' << a;
  out << '\n' << kColumns << '\n';
  const auto base = path.parent_path();
  for (const auto& row : manifest.rows) {
    out << row.id << '\t' << row.modality << '\t' << row.anatomy << '\t'
        << format_optional(row.class_id) << '\t' << format_optional(row.task_label) << '\t';
    if (!row.blob_path.empty()) {
      std::filesystem::create_directories((base / row.blob_path).parent_path());
      write_feature_blob(base / row.blob_path, row.features);
      out << '@' << row.blob_path;
    } else {
      for (std::size_t j = 0; j < row.features.size(); ++j) {
        if (j) out << ',';
        out << format_real(row.features[j]);
      }
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  file << out.str();
  if (!file) throw Error(ErrorCode::kIo, "failed writing manifest " + path.string());
}

Matrix feature_matrix(const Manifest& manifest) {
  Matrix m(static_cast<Eigen::Index>(manifest.rows.size()),
           static_cast<Eigen::Index>(manifest.feature_dim()));
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    for (std::size_t j = 0; j < manifest.rows[i].features.size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = manifest.rows[i].features[j];
    }
  }
  return m;
}

PretrainDataset to_pretrain_dataset(const Manifest& manifest) {
  PretrainDataset ds;
  ds.features = feature_matrix(manifest);
  bool all_classes = !manifest.rows.empty();
  for (const auto& row : manifest.rows) {
    ds.labels.push_back(encode(row.modality, row.anatomy, manifest.vocab));
    all_classes = all_classes && row.class_id.has_value();
  }
  if (all_classes) {
    for (const auto& row : manifest.rows) ds.class_ids.push_back(*row.class_id);
  }
  return ds;
}

LabeledDataset to_task_dataset(const Manifest& manifest) {
  LabeledDataset ds;
  ds.features = feature_matrix(manifest);
  for (const auto& row : manifest.rows) {
    if (!row.task_label) {
      throw Error(ErrorCode::kMissingLabels, "row '" + row.id + "' has no task_label");
    }
    ds.labels.push_back(*row.task_label);
  }
  return ds;
}

}  // namespace modan
