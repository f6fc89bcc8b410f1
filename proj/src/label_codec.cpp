#include "modan/label_codec.hpp"

#include <algorithm>
#include <set>

#include "modan/error.hpp"

namespace modan {

namespace {

void check_names(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) {
    throw Error(ErrorCode::kBadConfig, std::string(what) + " list is empty");
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw Error(ErrorCode::kBadConfig, std::string("empty name in ") + what);
    if (!seen.insert(n).second) {
      throw Error(ErrorCode::kBadConfig, std::string("duplicate ") + what + " name '" + n + "'");
    }
  }
}

std::size_t find_index(const std::vector<std::string>& names, std::string_view name,
                       const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::kUnknownName, std::string(what) + " '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

MetadataVocabulary::MetadataVocabulary(std::vector<std::string> modalities,
                                       std::vector<std::string> anatomies)
    : modalities_(std::move(modalities)), anatomies_(std::move(anatomies)) {
  check_names(modalities_, "modality");
  check_names(anatomies_, "anatomy");
}

std::size_t MetadataVocabulary::modality_index(std::string_view name) const {
  return find_index(modalities_, name, "modality");
}

std::size_t MetadataVocabulary::anatomy_index(std::string_view name) const {
  return find_index(anatomies_, name, "anatomy");
}

MultiHotLabel::MultiHotLabel(std::vector<bool> bits) : bits_(std::move(bits)) {
  if (std::none_of(bits_.begin(), bits_.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::kEmptyLabel, "multi-hot label has no active bit");
  }
}

MultiHotLabel encode(std::string_view modality, std::string_view anatomy,
                     const MetadataVocabulary& vocab) {
  const std::size_t m = vocab.modality_index(modality);
  const std::size_t a = vocab.anatomy_index(anatomy);
  std::vector<bool> bits(vocab.label_dim(), false);
  bits[m] = true;
  bits[vocab.modalities().size() + a] = true;
  return MultiHotLabel(std::move(bits));
}

std::vector<std::size_t> active_set(const MultiHotLabel& label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i]) out.push_back(i);
  }
  return out;
}

SetOverlap overlap(const MultiHotLabel& a, const MultiHotLabel& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "labels have different dimensions");
  }
  SetOverlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.intersection += (a[i] && b[i]) ? 1 : 0;
    o.union_size += (a[i] || b[i]) ? 1 : 0;
  }
  if (o.union_size == 0) throw Error(ErrorCode::kEmptyLabel, "empty union");
  return o;
}

double jaccard(const MultiHotLabel& a, const MultiHotLabel& b) { return overlap(a, b).ratio(); }

}  // namespace modan
