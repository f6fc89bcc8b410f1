#include "modan/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "modan/error.hpp"

namespace modan {

using nlohmann::json;

namespace {

const char* head_name(HeadKind k) {
  switch (k) {
    case HeadKind::kNone: return "none";
    case HeadKind::kProjection: return "projection";
    case HeadKind::kClassifier: return "classifier";
  }
  return "none";
}

HeadKind parse_head(const std::string& s) {
  if (s == "none") return HeadKind::kNone;
  if (s == "projection") return HeadKind::kProjection;
  if (s == "classifier") return HeadKind::kClassifier;
  throw Error(ErrorCode::kParseError, "unknown head kind '" + s + "'");
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "modan-checkpoint";
  doc["version"] = kCheckpointVersion;
  doc["method"] = ckpt.method;
  doc["seed"] = ckpt.seed;
  doc["head"] = head_name(ckpt.model.head());
  doc["backbone_depth"] = ckpt.model.backbone_depth();
  json layers = json::array();
  for (const auto& l : ckpt.model.layers()) {
    // Row-major weight values.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.weight;
    layers.push_back({{"rows", l.weight.rows()},
                      {"cols", l.weight.cols()},
                      {"weight", std::vector<double>(w.data(), w.data() + w.size())},
                      {"bias", vector_json(l.bias)}});
  }
  doc["layers"] = std::move(layers);
  if (ckpt.classifier) {
    doc["classifier"] = {{"weight", vector_json(ckpt.classifier->weight)},
                         {"bias", ckpt.classifier->bias}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  Checkpoint ckpt;
  try {
    const json doc = json::parse(in);
    if (doc.at("format") != "modan-checkpoint") {
      throw Error(ErrorCode::kParseError, "not a checkpoint file");
    }
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::kParseError, "unsupported checkpoint version " + doc.at("version").dump());
    }
    std::vector<DenseLayer> layers;
    for (const auto& lj : doc.at("layers")) {
      const auto rows = lj.at("rows").get<Eigen::Index>();
      const auto cols = lj.at("cols").get<Eigen::Index>();
      const auto w = lj.at("weight").get<std::vector<double>>();
      if (rows <= 0 || cols <= 0 || static_cast<Eigen::Index>(w.size()) != rows * cols) {
        throw Error(ErrorCode::kShapeMismatch, "layer weight count does not match its shape");
      }
      DenseLayer layer;
      layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), rows, cols);
      layer.bias = vector_from(lj.at("bias"));
      layers.push_back(std::move(layer));
    }
    ckpt.model = EncoderModel(std::move(layers), doc.at("backbone_depth").get<std::size_t>(),
                              parse_head(doc.at("head").get<std::string>()));
    ckpt.method = doc.at("method").get<std::string>();
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("classifier")) {
      ClassifierHead head{vector_from(doc["classifier"].at("weight")),
                          doc["classifier"].at("bias").get<double>()};
      if (static_cast<std::size_t>(head.weight.size()) != ckpt.model.embedding_dim()) {
        throw Error(ErrorCode::kShapeMismatch, "classifier width does not match the embedding");
      }
      ckpt.classifier = std::move(head);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, "checkpoint " + path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace modan
