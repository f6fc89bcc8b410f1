#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace modan {

/// Ordered modality and anatomy names. Label dimension is the sum of both.
class MetadataVocabulary {
 public:
  MetadataVocabulary(std::vector<std::string> modalities, std::vector<std::string> anatomies);

  const std::vector<std::string>& modalities() const noexcept { return modalities_; }
  const std::vector<std::string>& anatomies() const noexcept { return anatomies_; }

  std::size_t label_dim() const noexcept { return modalities_.size() + anatomies_.size(); }
  std::size_t cell_count() const noexcept { return modalities_.size() * anatomies_.size(); }

  // Throws UnknownName.
  std::size_t modality_index(std::string_view name) const;
  std::size_t anatomy_index(std::string_view name) const;

  bool operator==(const MetadataVocabulary&) const = default;

 private:
  std::vector<std::string> modalities_;
  std::vector<std::string> anatomies_;
};

/// Dense binary label, modality block first then anatomy block. Never empty.
class MultiHotLabel {
 public:
  explicit MultiHotLabel(std::vector<bool> bits);

  const std::vector<bool>& bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }

  bool operator==(const MultiHotLabel&) const = default;

 private:
  std::vector<bool> bits_;
};

MultiHotLabel encode(std::string_view modality, std::string_view anatomy,
                     const MetadataVocabulary& vocab);

/// Indices of the active bits, ascending.
std::vector<std::size_t> active_set(const MultiHotLabel& label);

/// Intersection and union sizes of two active sets; kept as integers so
/// threshold comparisons see one correctly rounded division.
struct SetOverlap {
  std::size_t intersection = 0;
  std::size_t union_size = 0;

  double ratio() const {
    return static_cast<double>(intersection) / static_cast<double>(union_size);
  }
};

SetOverlap overlap(const MultiHotLabel& a, const MultiHotLabel& b);

double jaccard(const MultiHotLabel& a, const MultiHotLabel& b);

}  // namespace modan
