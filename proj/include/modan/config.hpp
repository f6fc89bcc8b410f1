#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "modan/label_codec.hpp"
#include "modan/synthetic.hpp"
#include "modan/trainer.hpp"

namespace modan {

/// Name of the randomly initialized arm in an evaluation.
inline constexpr const char* kScratchMethod = "scratch";

struct EvaluateConfig {
  std::vector<std::string> methods = {"mulsupcon", "infonce", "supcon", "crossentropy",
                                      kScratchMethod};
  std::string proposed = "mulsupcon";
  std::size_t folds = 5;
  std::size_t repeats = 10;
};

/// Everything one run needs. Loaded from JSON; unknown keys are rejected and
/// every section is validated before any computation starts.
///
/// Pretraining settings resolve in three layers: per-method table defaults,
/// then the common "pretrain" section, then "pretrain_overrides"[method].
class RunConfig {
 public:
  RunConfig();

  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Canonical JSON form; from_json(to_json()) reproduces the config.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical JSON dump, as 16 hex digits.
  std::string fingerprint() const;

  PretrainConfig pretrain_config(PretrainMethod method) const;
  /// Uses the method named in the "pretrain" section.
  PretrainConfig pretrain_config() const;
  DownstreamConfig downstream_config() const { return downstream_; }
  const AugmentationConfig& augmentation() const { return augmentation_; }
  const EncoderArchitecture& architecture() const { return architecture_; }
  const EvaluateConfig& evaluate() const { return evaluate_; }
  const SynthConfig& synth() const { return synth_; }
  const MetadataVocabulary& synth_vocab() const { return synth_vocab_; }

  std::uint64_t seed = 0;
  std::filesystem::path pretrain_manifest;
  std::filesystem::path task_manifest;

  void set_seed(std::uint64_t s);
  void set_pretrain_method(PretrainMethod m);

  void validate() const;

 private:
  nlohmann::json pretrain_common_ = nlohmann::json::object();
  nlohmann::json pretrain_overrides_ = nlohmann::json::object();
  AugmentationConfig augmentation_;
  EncoderArchitecture architecture_;
  DownstreamConfig downstream_;
  EvaluateConfig evaluate_;
  SynthConfig synth_;
  MetadataVocabulary synth_vocab_;
};

}  // namespace modan
