#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modan/label_codec.hpp"
#include "modan/trainer.hpp"

namespace modan {

// Line-oriented, tab-separated text:
//
//   #modan-manifest<TAB>1
//   #modalities<TAB>CT<TAB>MR<TAB>US
//   #anatomies<TAB>knee<TAB>breast<TAB>thyroid
//   id<TAB>modality<TAB>anatomy<TAB>class_id<TAB>task_label<TAB>features
//   s0<TAB>CT<TAB>knee<TAB>3<TAB>-<TAB>0.25,-1.5,...
//
// Optional integer fields hold "-" when absent. `features` is either a
// comma-separated list of reals (shortest round-trip form) or "@relative/path"
// naming a blob: little-endian uint64 count followed by count float64 values.

struct ManifestRow {
  std::string id;
  std::string modality;
  std::string anatomy;
  std::optional<int> class_id;
  std::optional<int> task_label;
  std::vector<double> features;
  std::string blob_path;  // empty when features are inline

  bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
  MetadataVocabulary vocab;
  std::vector<ManifestRow> rows;

  std::size_t feature_dim() const { return rows.empty() ? 0 : rows.front().features.size(); }
  bool operator==(const Manifest&) const = default;
};

inline constexpr int kManifestVersion = 1;

/// Throws ParseError, UnknownName, DimensionMismatch, DuplicateId, Io.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest and any referenced blobs (relative to its directory).
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Validates ids, names and dimensions; the same checks load_manifest runs.
void validate_manifest(const Manifest& manifest);

std::vector<double> read_feature_blob(const std::filesystem::path& path);
void write_feature_blob(const std::filesystem::path& path, const std::vector<double>& values);

/// Metadata labels always; class ids only when every row has one.
PretrainDataset to_pretrain_dataset(const Manifest& manifest);

/// Throws MissingLabels when any row lacks task_label.
LabeledDataset to_task_dataset(const Manifest& manifest);

Matrix feature_matrix(const Manifest& manifest);

}  // namespace modan
