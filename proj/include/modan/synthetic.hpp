#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "modan/label_codec.hpp"
#include "modan/manifest.hpp"
#include "modan/trainer.hpp"

namespace modan {

/// Hierarchical Gaussian corpus standing in for a metadata-labeled image
/// collection plus one small downstream task.
///
/// Features live in R^latent_dim. Every modality and every anatomy owns one
/// direction from a random orthonormal set; a cell's mean is
/// separation * (modality_dir + anatomy_dir). Within a cell, noise has
/// standard deviation noise_sigma inside the span of those metadata directions
/// and nuisance_scale * noise_sigma in its orthogonal complement.
///
/// The downstream task draws task_size fresh samples from the designated cell
/// (the last modality x last anatomy) and labels each by the sign of its
/// offset along a fixed unit direction inside the metadata span.
struct SynthConfig {
  std::size_t n_per_cell = 50;
  std::size_t latent_dim = 16;
  double noise_sigma = 0.3;
  double separation = 2.0;
  double nuisance_scale = 3.0;
  std::size_t task_size = 200;
  std::uint64_t seed = 0;

  void validate(const MetadataVocabulary& vocab) const;
};

struct SyntheticCorpus {
  MetadataVocabulary vocab;
  PretrainDataset pretrain;
  std::vector<std::size_t> cell_of;  // per pretraining row: modality * |anatomies| + anatomy
  Matrix cell_means;                 // one row per cell
  std::size_t task_cell = 0;
  Vector task_direction;
  LabeledDataset task;

  /// Pretraining rows with class_id = cell index.
  Manifest pretrain_manifest() const;
  /// Task rows, all in the designated cell, with task_label set.
  Manifest task_manifest() const;
};

/// Deterministic in cfg.seed. Throws BadConfig.
SyntheticCorpus generate_hierarchical_corpus(const MetadataVocabulary& vocab,
                                             const SynthConfig& cfg);

/// Keeps min(count, cap) uniformly sampled rows per class, preserving row
/// order. The class is class_id when every row has one, otherwise the
/// (modality, anatomy) pair.
Manifest cap_per_class(const Manifest& manifest, std::size_t cap, std::uint64_t seed);

}  // namespace modan
