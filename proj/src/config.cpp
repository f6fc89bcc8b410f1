#include "modan/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "modan/error.hpp"
#include "modan/seeding.hpp"

namespace modan {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kBadConfig, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::kBadConfig, "unknown key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kBadConfig, "field '" + where + "." + key + "' has the wrong type");
  }
}

const std::set<std::string> kPretrainKeys = {"method",   "temperature",  "threshold",
                                              "optimizer", "learning_rate", "momentum",
                                              "weight_decay", "epochs",   "batch_size"};

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgdMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kBadConfig, "unknown optimizer '" + name + "' (sgd|adam)");
}

void apply_pretrain_keys(const json& obj, PretrainConfig& cfg, const std::string& where) {
  reject_unknown(obj, kPretrainKeys, where);
  if (obj.contains("optimizer")) {
    std::string name;
    read(obj, "optimizer", name, where);
    const OptimizerKind kind = parse_optimizer(name);
    if (kind != cfg.optimizer.kind) {
      cfg.optimizer = kind == OptimizerKind::kAdam ? OptimizerSpec::adam() : OptimizerSpec::sgd(0.9, 1e-4);
    }
  }
  read(obj, "temperature", cfg.loss.temperature, where);
  read(obj, "threshold", cfg.loss.threshold, where);
  read(obj, "learning_rate", cfg.schedule.base_lr, where);
  read(obj, "momentum", cfg.optimizer.momentum, where);
  read(obj, "weight_decay", cfg.optimizer.weight_decay, where);
  read(obj, "epochs", cfg.epochs, where);
  read(obj, "batch_size", cfg.batch_size, where);
}

DownstreamRegime parse_regime(const std::string& name) {
  if (name == "finetune") return DownstreamRegime::kFinetune;
  if (name == "linear_probe" || name == "probe") return DownstreamRegime::kLinearProbe;
  throw Error(ErrorCode::kBadConfig, "unknown regime '" + name + "' (finetune|linear_probe)");
}

}  // namespace

RunConfig::RunConfig()
    : synth_vocab_({"CT", "MR", "US"}, {"abdomen", "knee", "thyroid"}) {}

RunConfig RunConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  reject_unknown(doc,
                 {"seed", "pretrain_manifest", "task_manifest", "pretrain", "pretrain_overrides",
                  "augmentation", "architecture", "downstream", "evaluate", "synth"},
                 "config");
  read(doc, "seed", cfg.seed, "config");
  auto resolve = [&](const char* key, std::filesystem::path& out) {
    std::string s;
    read(doc, key, s, "config");
    if (s.empty()) return;
    const std::filesystem::path p(s);
    out = p.is_absolute() ? p : base_dir / p;
  };
  resolve("pretrain_manifest", cfg.pretrain_manifest);
  resolve("task_manifest", cfg.task_manifest);

  if (doc.contains("pretrain")) {
    reject_unknown(doc["pretrain"], kPretrainKeys, "pretrain");
    cfg.pretrain_common_ = doc["pretrain"];
  }
  if (doc.contains("pretrain_overrides")) {
    const auto& ov = doc["pretrain_overrides"];
    if (!ov.is_object()) throw Error(ErrorCode::kBadConfig, "pretrain_overrides must be an object");
    for (const auto& [name, section] : ov.items()) {
      parse_pretrain_method(name);
      reject_unknown(section, kPretrainKeys, "pretrain_overrides." + name);
      if (section.contains("method")) {
        throw Error(ErrorCode::kBadConfig, "pretrain_overrides." + name + ".method is not allowed");
      }
    }
    cfg.pretrain_overrides_ = ov;
  }

  if (doc.contains("augmentation")) {
    const auto& a = doc["augmentation"];
    reject_unknown(a, {"gaussian_sigma", "feature_dropout_p", "scale_jitter"}, "augmentation");
    read(a, "gaussian_sigma", cfg.augmentation_.gaussian_sigma, "augmentation");
    read(a, "feature_dropout_p", cfg.augmentation_.feature_dropout_p, "augmentation");
    if (a.contains("scale_jitter")) {
      std::vector<double> range;
      read(a, "scale_jitter", range, "augmentation");
      if (range.size() != 2) {
        throw Error(ErrorCode::kBadConfig, "augmentation.scale_jitter must be [lo, hi]");
      }
      cfg.augmentation_.scale_lo = range[0];
      cfg.augmentation_.scale_hi = range[1];
    }
  }

  if (doc.contains("architecture")) {
    const auto& a = doc["architecture"];
    reject_unknown(a, {"hidden", "embedding_dim", "projection_head", "projection_dims"}, "architecture");
    read(a, "hidden", cfg.architecture_.hidden, "architecture");
    read(a, "embedding_dim", cfg.architecture_.embedding_dim, "architecture");
    read(a, "projection_head", cfg.architecture_.projection_head, "architecture");
    read(a, "projection_dims", cfg.architecture_.projection_dims, "architecture");
  }

  if (doc.contains("downstream")) {
    const auto& d = doc["downstream"];
    reject_unknown(d, {"regime", "epochs", "batch_size", "learning_rate", "weight_decay", "schedule",
                       "step_epoch", "gamma"},
                   "downstream");
    auto& ds = cfg.downstream_;
    if (d.contains("regime")) {
      std::string regime;
      read(d, "regime", regime, "downstream");
      ds.regime = parse_regime(regime);
    }
    read(d, "epochs", ds.epochs, "downstream");
    read(d, "batch_size", ds.batch_size, "downstream");
    read(d, "learning_rate", ds.schedule.base_lr, "downstream");
    read(d, "weight_decay", ds.optimizer.weight_decay, "downstream");
    if (d.contains("schedule")) {
      std::string kind;
      read(d, "schedule", kind, "downstream");
      if (kind == "constant") {
        ds.schedule.kind = ScheduleKind::kConstant;
      } else if (kind == "step") {
        ds.schedule.kind = ScheduleKind::kStep;
      } else {
        throw Error(ErrorCode::kBadConfig, "downstream.schedule must be constant|step");
      }
    }
    read(d, "step_epoch", ds.schedule.step_epoch, "downstream");
    read(d, "gamma", ds.schedule.gamma, "downstream");
  }

  if (doc.contains("evaluate")) {
    const auto& e = doc["evaluate"];
    reject_unknown(e, {"methods", "proposed", "folds", "repeats"}, "evaluate");
    read(e, "methods", cfg.evaluate_.methods, "evaluate");
    read(e, "proposed", cfg.evaluate_.proposed, "evaluate");
    read(e, "folds", cfg.evaluate_.folds, "evaluate");
    read(e, "repeats", cfg.evaluate_.repeats, "evaluate");
  }

  if (doc.contains("synth")) {
    const auto& s = doc["synth"];
    reject_unknown(s, {"modalities", "anatomies", "n_per_cell", "latent_dim", "noise_sigma",
                       "separation", "nuisance_scale", "task_size"},
                   "synth");
    std::vector<std::string> mods = cfg.synth_vocab_.modalities();
    std::vector<std::string> anats = cfg.synth_vocab_.anatomies();
    read(s, "modalities", mods, "synth");
    read(s, "anatomies", anats, "synth");
    cfg.synth_vocab_ = MetadataVocabulary(mods, anats);
    read(s, "n_per_cell", cfg.synth_.n_per_cell, "synth");
    read(s, "latent_dim", cfg.synth_.latent_dim, "synth");
    read(s, "noise_sigma", cfg.synth_.noise_sigma, "synth");
    read(s, "separation", cfg.synth_.separation, "synth");
    read(s, "nuisance_scale", cfg.synth_.nuisance_scale, "synth");
    read(s, "task_size", cfg.synth_.task_size, "synth");
  }
  cfg.synth_.seed = cfg.seed;
  cfg.downstream_.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "config " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  synth_.seed = s;
  downstream_.seed = s;
}

void RunConfig::set_pretrain_method(PretrainMethod m) {
  pretrain_common_["method"] = std::string(to_string(m));
}

PretrainConfig RunConfig::pretrain_config(PretrainMethod method) const {
  PretrainConfig cfg = PretrainConfig::defaults_for(method);
  apply_pretrain_keys(pretrain_common_, cfg, "pretrain");
  cfg.method = method;
  const std::string name(to_string(method));
  if (pretrain_overrides_.contains(name)) {
    apply_pretrain_keys(pretrain_overrides_[name], cfg, "pretrain_overrides." + name);
  }
  cfg.augmentation = augmentation_;
  cfg.architecture = architecture_;
  cfg.seed = seed;
  return cfg;
}

PretrainConfig RunConfig::pretrain_config() const {
  std::string name = "mulsupcon";
  read(pretrain_common_, "method", name, "pretrain");
  return pretrain_config(parse_pretrain_method(name));
}

void RunConfig::validate() const {
  for (auto m : {PretrainMethod::kMulSupCon, PretrainMethod::kInfoNce, PretrainMethod::kSupCon,
                 PretrainMethod::kCrossEntropy}) {
    pretrain_config(m).validate();
  }
  pretrain_config();
  downstream_.validate();
  augmentation_.validate();
  architecture_.validate();
  synth_.validate(synth_vocab_);
  if (evaluate_.methods.empty()) throw Error(ErrorCode::kBadConfig, "evaluate.methods is empty");
  std::set<std::string> seen;
  bool has_proposed = false;
  for (const auto& m : evaluate_.methods) {
    if (m != kScratchMethod) parse_pretrain_method(m);
    if (!seen.insert(m).second) throw Error(ErrorCode::kBadConfig, "evaluate.methods repeats '" + m + "'");
    has_proposed = has_proposed || m == evaluate_.proposed;
  }
  if (!has_proposed) {
    throw Error(ErrorCode::kBadConfig, "evaluate.proposed '" + evaluate_.proposed + "' is not in methods");
  }
  if (evaluate_.folds < 2) throw Error(ErrorCode::kBadConfig, "evaluate.folds must be >= 2");
  if (evaluate_.repeats < 1) throw Error(ErrorCode::kBadConfig, "evaluate.repeats must be >= 1");
}

json RunConfig::to_json() const {
  json doc;
  doc["seed"] = seed;
  doc["pretrain_manifest"] = pretrain_manifest.string();
  doc["task_manifest"] = task_manifest.string();
  doc["pretrain"] = pretrain_common_;
  doc["pretrain_overrides"] = pretrain_overrides_;
  doc["augmentation"] = {{"gaussian_sigma", augmentation_.gaussian_sigma},
                         {"feature_dropout_p", augmentation_.feature_dropout_p},
                         {"scale_jitter", {augmentation_.scale_lo, augmentation_.scale_hi}}};
  doc["architecture"] = {{"hidden", architecture_.hidden},
                         {"embedding_dim", architecture_.embedding_dim},
                         {"projection_head", architecture_.projection_head},
                         {"projection_dims", architecture_.projection_dims}};
  doc["downstream"] = {
      {"regime", downstream_.regime == DownstreamRegime::kFinetune ? "finetune" : "linear_probe"},
      {"epochs", downstream_.epochs},
      {"batch_size", downstream_.batch_size},
      {"learning_rate", downstream_.schedule.base_lr},
      {"weight_decay", downstream_.optimizer.weight_decay},
      {"schedule", downstream_.schedule.kind == ScheduleKind::kStep ? "step" : "constant"},
      {"step_epoch", downstream_.schedule.step_epoch},
      {"gamma", downstream_.schedule.gamma}};
  doc["evaluate"] = {{"methods", evaluate_.methods},
                     {"proposed", evaluate_.proposed},
                     {"folds", evaluate_.folds},
                     {"repeats", evaluate_.repeats}};
  doc["synth"] = {{"modalities", synth_vocab_.modalities()},
                  {"anatomies", synth_vocab_.anatomies()},
                  {"n_per_cell", synth_.n_per_cell},
                  {"latent_dim", synth_.latent_dim},
                  {"noise_sigma", synth_.noise_sigma},
                  {"separation", synth_.separation},
                  {"nuisance_scale", synth_.nuisance_scale},
                  {"task_size", synth_.task_size}};
  return doc;
}

std::string RunConfig::fingerprint() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

}  // namespace modan
