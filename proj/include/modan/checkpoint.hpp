#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "modan/encoder.hpp"
#include "modan/trainer.hpp"

namespace modan {

inline constexpr int kCheckpointVersion = 1;

/// JSON document holding every parameter as a float64 (shortest round-trip
/// text), the layer shapes, head kind, seed and the training-method tag.
struct Checkpoint {
  EncoderModel model;
  std::optional<ClassifierHead> classifier;  // present after downstream training
  std::string method;                        // "mulsupcon", "scratch", ...
  std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws ParseError on a malformed or wrong-version file, ShapeMismatch on
/// inconsistent layer shapes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace modan
