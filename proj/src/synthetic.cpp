#include "modan/synthetic.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <map>
#include <random>
#include <string>

#include "modan/error.hpp"
#include "modan/seeding.hpp"

namespace modan {

void SynthConfig::validate(const MetadataVocabulary& vocab) const {
  const std::size_t meta = vocab.modalities().size() + vocab.anatomies().size();
  if (n_per_cell == 0) throw Error(ErrorCode::kBadConfig, "n_per_cell must be >= 1");
  if (latent_dim <= meta) {
    throw Error(ErrorCode::kBadConfig, "latent_dim must exceed |modalities| + |anatomies| = " +
                                           std::to_string(meta));
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kBadConfig, "noise_sigma must be >= 0");
  if (!(separation > 0.0)) throw Error(ErrorCode::kBadConfig, "separation must be > 0");
  if (!(nuisance_scale >= 0.0)) throw Error(ErrorCode::kBadConfig, "nuisance_scale must be >= 0");
  if (task_size < 2) throw Error(ErrorCode::kBadConfig, "task_size must be >= 2");
}

namespace {

Manifest rows_to_manifest(const MetadataVocabulary& vocab, const Matrix& features,
                          const std::vector<std::size_t>& cells, const std::vector<int>* task_labels,
                          const char* prefix, bool with_class) {
  Manifest m{vocab, {}};
  const std::size_t n_anat = vocab.anatomies().size();
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const std::size_t cell = cells[static_cast<std::size_t>(i)];
    ManifestRow row;
    row.id = std::string(prefix) + std::to_string(i);
    row.modality = vocab.modalities()[cell / n_anat];
    row.anatomy = vocab.anatomies()[cell % n_anat];
    if (with_class) row.class_id = static_cast<int>(cell);
    if (task_labels) row.task_label = (*task_labels)[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < features.cols(); ++j) row.features.push_back(features(i, j));
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace

Manifest SyntheticCorpus::pretrain_manifest() const {
  return rows_to_manifest(vocab, pretrain.features, cell_of, nullptr, "pre", true);
}

Manifest SyntheticCorpus::task_manifest() const {
  const std::vector<std::size_t> cells(task.size(), task_cell);
  return rows_to_manifest(vocab, task.features, cells, &task.labels, "task", false);
}

SyntheticCorpus generate_hierarchical_corpus(const MetadataVocabulary& vocab,
                                             const SynthConfig& cfg) {
  cfg.validate(vocab);
  const auto dim = static_cast<Eigen::Index>(cfg.latent_dim);
  const std::size_t n_mod = vocab.modalities().size();
  const std::size_t n_anat = vocab.anatomies().size();
  const auto n_meta = static_cast<Eigen::Index>(n_mod + n_anat);

  std::mt19937_64 rng(derive_seed(cfg.seed, "synth", 0));
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix raw(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) raw(r, c) = gauss(rng);
  }
  const Matrix basis = Eigen::HouseholderQR<Matrix>(raw).householderQ();
  const Matrix meta_dirs = basis.leftCols(n_meta);  // columns: modalities, then anatomies
  const Matrix nuisance_dirs = basis.rightCols(dim - n_meta);

  SyntheticCorpus out{vocab, {}, {}, Matrix(static_cast<Eigen::Index>(n_mod * n_anat), dim), 0,
                      Vector(), {}};
  for (std::size_t m = 0; m < n_mod; ++m) {
    for (std::size_t a = 0; a < n_anat; ++a) {
      const auto cell = static_cast<Eigen::Index>(m * n_anat + a);
      out.cell_means.row(cell) =
          cfg.separation * (meta_dirs.col(static_cast<Eigen::Index>(m)) +
                            meta_dirs.col(static_cast<Eigen::Index>(n_mod + a)))
                               .transpose();
    }
  }

  auto draw = [&](Eigen::Index cell) {
    Vector x = out.cell_means.row(cell).transpose();
    if (cfg.noise_sigma == 0.0) return x;
    Vector g_meta(n_meta), g_nuis(dim - n_meta);
    for (Eigen::Index i = 0; i < n_meta; ++i) g_meta(i) = gauss(rng);
    for (Eigen::Index i = 0; i < dim - n_meta; ++i) g_nuis(i) = gauss(rng);
    x += cfg.noise_sigma * (meta_dirs * g_meta + cfg.nuisance_scale * (nuisance_dirs * g_nuis));
    return x;
  };

  const std::size_t n_cells = n_mod * n_anat;
  out.pretrain.features.resize(static_cast<Eigen::Index>(n_cells * cfg.n_per_cell), dim);
  Eigen::Index row = 0;
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    const std::size_t m = cell / n_anat, a = cell % n_anat;
    const MultiHotLabel label = encode(vocab.modalities()[m], vocab.anatomies()[a], vocab);
    for (std::size_t i = 0; i < cfg.n_per_cell; ++i) {
      out.pretrain.features.row(row++) = draw(static_cast<Eigen::Index>(cell)).transpose();
      out.pretrain.labels.push_back(label);
      out.pretrain.class_ids.push_back(static_cast<int>(cell));
      out.cell_of.push_back(cell);
    }
  }

  out.task_cell = n_cells - 1;
  Vector mix(n_meta);
  for (Eigen::Index i = 0; i < n_meta; ++i) mix(i) = gauss(rng);
  out.task_direction = (meta_dirs * mix).normalized();

  const Vector center = out.cell_means.row(static_cast<Eigen::Index>(out.task_cell)).transpose();
  out.task.features.resize(static_cast<Eigen::Index>(cfg.task_size), dim);
  for (std::size_t i = 0; i < cfg.task_size; ++i) {
    const Vector x = draw(static_cast<Eigen::Index>(out.task_cell));
    out.task.features.row(static_cast<Eigen::Index>(i)) = x.transpose();
    out.task.labels.push_back(out.task_direction.dot(x - center) > 0.0 ? 1 : 0);
  }
  return out;
}

Manifest cap_per_class(const Manifest& manifest, std::size_t cap, std::uint64_t seed) {
  const bool by_class_id =
      !manifest.rows.empty() &&
      std::all_of(manifest.rows.begin(), manifest.rows.end(),
                  [](const ManifestRow& r) { return r.class_id.has_value(); });

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& r = manifest.rows[i];
    groups[by_class_id ? std::to_string(*r.class_id) : r.modality + '\t' + r.anatomy].push_back(i);
  }

  std::vector<bool> keep(manifest.rows.size(), false);
  std::mt19937_64 rng(derive_seed(seed, "cap", 0));
  for (auto& [key, members] : groups) {
    if (members.size() > cap) {
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(cap);
    }
    for (auto i : members) keep[i] = true;
  }

  Manifest out{manifest.vocab, {}};
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    if (keep[i]) out.rows.push_back(manifest.rows[i]);
  }
  return out;
}

}  // namespace modan
