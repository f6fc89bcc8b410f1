#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "modan/checkpoint.hpp"
#include "modan/cli.hpp"
#include "modan/config.hpp"
#include "modan/error.hpp"
#include "modan/manifest.hpp"
#include "modan/seeding.hpp"
#include "modan/synthetic.hpp"

using namespace modan;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIo;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_io_work" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kHeader =
    "#modan-manifest\t1\n"
    "#modalities\tCT\tMR\tUS\n"
    "#anatomies\tknee\tbreast\tthyroid\n"
    "id\tmodality\tanatomy\tclass_id\ttask_label\tfeatures\n";

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("load_manifest happy path and round trip") {
  const fs::path dir = scratch_dir("manifest");
  write_file(dir / "m.tsv", std::string(kHeader) +
                                "a\tCT\tknee\t0\t1\t0.5,-1.25,3\n"
                                "b\tMR\tthyroid\t-\t0\t1e-3,2,0.1\n"
                                "c\tUS\tbreast\t4\t-\t0,0,0\n");
  const Manifest m = load_manifest(dir / "m.tsv");
  REQUIRE(m.rows.size() == 3);
  CHECK(m.feature_dim() == 3);
  CHECK(m.rows[0].class_id == 0);
  CHECK_FALSE(m.rows[1].class_id.has_value());
  CHECK(m.rows[1].features[0] == 1e-3);
  CHECK_FALSE(m.rows[2].task_label.has_value());
  CHECK(m.vocab.anatomies()[2] == "thyroid");

  save_manifest(m, dir / "copy.tsv");
  CHECK(load_manifest(dir / "copy.tsv") == m);

  Manifest precise = m;
  precise.rows[0].features = {0.1 + 0.2, 1.0 / 3.0, -2.5e-300};
  save_manifest(precise, dir / "precise.tsv");
  CHECK(load_manifest(dir / "precise.tsv") == precise);

  const PretrainDataset pd = to_pretrain_dataset(m);
  CHECK(pd.labels.size() == 3);
  CHECK(pd.class_ids.empty());
  CHECK(code_of([&] { to_task_dataset(m); }) == ErrorCode::kMissingLabels);
}

TEST_CASE("load_manifest validation errors") {
  const fs::path dir = scratch_dir("invalid");
  write_file(dir / "xr.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t1,2\nb\tXR\tknee\t-\t-\t1,2\n");
  try {
    load_manifest(dir / "xr.tsv");
    FAIL("expected UnknownName");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownName);
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
    CHECK(std::string(e.what()).find("XR") != std::string::npos);
  }

  std::string eight = "1,2,3,4,5,6,7,8", seven = "1,2,3,4,5,6,7";
  write_file(dir / "dim.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t" + eight + "\nb\tCT\tknee\t-\t-\t" + seven + "\n");
  CHECK(code_of([&] { load_manifest(dir / "dim.tsv"); }) == ErrorCode::kDimensionMismatch);

  write_file(dir / "dup.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t1\na\tMR\tknee\t-\t-\t2\n");
  CHECK(code_of([&] { load_manifest(dir / "dup.tsv"); }) == ErrorCode::kDuplicateId);

  write_file(dir / "cols.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t1\n");
  CHECK(code_of([&] { load_manifest(dir / "cols.tsv"); }) == ErrorCode::kParseError);

  write_file(dir / "num.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t1,abc\n");
  CHECK(code_of([&] { load_manifest(dir / "num.tsv"); }) == ErrorCode::kParseError);

  write_file(dir / "version.tsv", "#modan-manifest\t9\n");
  CHECK(code_of([&] { load_manifest(dir / "version.tsv"); }) == ErrorCode::kParseError);

  write_file(dir / "label.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t3\t1\n");
  CHECK(code_of([&] { load_manifest(dir / "label.tsv"); }) == ErrorCode::kParseError);

  CHECK(code_of([&] { load_manifest(dir / "missing.tsv"); }) == ErrorCode::kIo);
}

TEST_CASE("feature blobs") {
  const fs::path dir = scratch_dir("blob");
  const std::vector<double> values{1.5, -0.0, 3.25e-10, 7.0};
  write_feature_blob(dir / "x.bin", values);
  CHECK(fs::file_size(dir / "x.bin") == 8 + 4 * 8);
  CHECK(read_feature_blob(dir / "x.bin") == values);

  fs::create_directories(dir / "blobs");
  write_feature_blob(dir / "blobs" / "b.bin", {9.0, 8.0, 7.0, 6.0});
  write_file(dir / "m.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t@blobs/b.bin\nb\tMR\tknee\t-\t-\t1,2,3,4\n");
  const Manifest m = load_manifest(dir / "m.tsv");
  CHECK(m.rows[0].features == std::vector<double>{9.0, 8.0, 7.0, 6.0});
  CHECK(m.rows[0].blob_path == "blobs/b.bin");

  const fs::path copy = scratch_dir("blob_copy");
  save_manifest(m, copy / "m.tsv");
  CHECK(fs::exists(copy / "blobs" / "b.bin"));
  CHECK(load_manifest(copy / "m.tsv") == m);

  write_file(dir / "short.bin", std::string("\x05\0\0\0\0\0\0\0", 8));
  CHECK(code_of([&] { read_feature_blob(dir / "short.bin"); }) == ErrorCode::kParseError);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(42, "shuffle", 3) == derive_seed(42, "shuffle", 3));
  CHECK(derive_seed(42, "shuffle", 3) != derive_seed(42, "augment", 3));
  CHECK(derive_seed(42, "shuffle", 3) != derive_seed(43, "shuffle", 3));
  for (const char* role : {"shuffle", "augment", "init", "fold"}) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(7, role, i));
    CHECK(seen.size() == 10000);
  }
  // Frozen values: changing the derivation would silently change every run.
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("run config parsing and validation") {
  using nlohmann::json;
  const RunConfig defaults = RunConfig::from_json(json::object());
  CHECK(defaults.pretrain_config().method == PretrainMethod::kMulSupCon);
  CHECK(defaults.pretrain_config().loss.temperature == 0.07);
  CHECK(defaults.evaluate().folds == 5);
  CHECK(defaults.evaluate().repeats == 10);

  const json doc = json::parse(R"({
    "seed": 9,
    "pretrain": {"epochs": 12, "threshold": 0.5},
    "pretrain_overrides": {"infonce": {"temperature": 0.2}},
    "augmentation": {"scale_jitter": [0.9, 1.1]},
    "downstream": {"regime": "linear_probe", "epochs": 3},
    "evaluate": {"methods": ["mulsupcon", "scratch"], "repeats": 4}
  })");
  const RunConfig cfg = RunConfig::from_json(doc);
  CHECK(cfg.seed == 9);
  CHECK(cfg.pretrain_config(PretrainMethod::kMulSupCon).epochs == 12);
  CHECK(cfg.pretrain_config(PretrainMethod::kMulSupCon).loss.threshold == 0.5);
  CHECK(cfg.pretrain_config(PretrainMethod::kInfoNce).loss.temperature == 0.2);
  CHECK(cfg.pretrain_config(PretrainMethod::kSupCon).loss.temperature == 0.07);
  CHECK(cfg.pretrain_config(PretrainMethod::kMulSupCon).augmentation.scale_lo == 0.9);
  CHECK(cfg.downstream_config().regime == DownstreamRegime::kLinearProbe);
  CHECK(cfg.downstream_config().epochs == 3);
  CHECK(cfg.evaluate().repeats == 4);

  const RunConfig again = RunConfig::from_json(cfg.to_json());
  CHECK(again.fingerprint() == cfg.fingerprint());
  CHECK(cfg.fingerprint() != defaults.fingerprint());

  auto bad = [](const char* text) {
    return code_of([&] { RunConfig::from_json(json::parse(text)); });
  };
  CHECK(bad(R"({"seeed": 1})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"tau": 0.3}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"threshold": 1.5}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"threshold": -0.1}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"temperature": 0}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain_overrides": {"supcon": {"temperature": -1}}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"epochs": "ten"}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"pretrain": {"method": "byol"}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"downstream": {"regime": "lora"}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"evaluate": {"methods": ["infonce"]}})") == ErrorCode::kBadConfig);
  CHECK(bad(R"({"augmentation": {"feature_dropout_p": 2}})") == ErrorCode::kBadConfig);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = scratch_dir("ckpt");
  const EncoderModel m = EncoderModel::create({5, 7, 4}, HeadKind::kProjection, {4, 3}, 77);
  ClassifierHead head{Vector::LinSpaced(4, -1.0, 1.0 / 3.0), 0.1};
  save_checkpoint({m, head, "mulsupcon", 123}, dir / "m.json");
  const Checkpoint back = load_checkpoint(dir / "m.json");
  CHECK(back.model == m);
  CHECK(back.classifier == head);
  CHECK(back.method == "mulsupcon");
  CHECK(back.seed == 123);

  save_checkpoint({m.without_head(), std::nullopt, "scratch", 1}, dir / "b.json");
  CHECK_FALSE(load_checkpoint(dir / "b.json").classifier.has_value());

  auto doc = nlohmann::json::parse(read_file(dir / "m.json"));
  doc["version"] = 99;
  write_file(dir / "v.json", doc.dump());
  CHECK(code_of([&] { load_checkpoint(dir / "v.json"); }) == ErrorCode::kParseError);
  doc = nlohmann::json::parse(read_file(dir / "m.json"));
  doc["layers"][1]["cols"] = 6;
  write_file(dir / "s.json", doc.dump());
  CHECK(code_of([&] { load_checkpoint(dir / "s.json"); }) != ErrorCode::kIo);
  write_file(dir / "junk.json", "{not json");
  CHECK(code_of([&] { load_checkpoint(dir / "junk.json"); }) == ErrorCode::kParseError);
}

TEST_CASE("cli exit codes") {
  const CliRun unknown = run({"frobnicate", "--out", "x"});
  CHECK(unknown.code == kExitValidation);
  CHECK(unknown.err.find("pretrain") != std::string::npos);

  CHECK(run({}).code == kExitValidation);
  CHECK(run({"--help"}).code == kExitOk);

  const fs::path dir = scratch_dir("cli");
  write_file(dir / "noclass.tsv", std::string(kHeader) + "a\tCT\tknee\t-\t-\t1,2\nb\tMR\tknee\t-\t-\t2,1\n");
  const CliRun sup = run({"pretrain", "--manifest", (dir / "noclass.tsv").string(), "--method", "supcon", "--out",
                          (dir / "sup.json").string()});
  CHECK(sup.code == kExitValidation);
  CHECK(sup.err.find("MissingLabels") != std::string::npos);

  const CliRun bad_method = run({"pretrain", "--manifest", (dir / "noclass.tsv").string(), "--method", "byol",
                                 "--out", (dir / "x.json").string()});
  CHECK(bad_method.code == kExitValidation);

  const CliRun missing = run({"pretrain", "--manifest", (dir / "nope.tsv").string(), "--out", (dir / "x.json").string()});
  CHECK(missing.code == kExitRuntime);

  write_file(dir / "bad.json", R"({"pretrain": {"temperature": -1}})");
  const CliRun badcfg = run({"evaluate", "--config", (dir / "bad.json").string(), "--out", (dir / "r.tsv").string()});
  CHECK(badcfg.code == kExitValidation);
  CHECK(badcfg.err.find("temperature") != std::string::npos);
}

TEST_CASE("cli pipeline on a small synthetic corpus") {
  const fs::path dir = scratch_dir("pipeline");
  write_file(dir / "cfg.json", R"({
    "seed": 5,
    "pretrain_manifest": "data/pretrain.tsv",
    "task_manifest": "data/task.tsv",
    "pretrain": {"epochs": 3, "batch_size": 64},
    "architecture": {"hidden": [16], "embedding_dim": 8, "projection_dims": [8, 4]},
    "downstream": {"epochs": 2},
    "evaluate": {"methods": ["mulsupcon", "scratch"], "folds": 3, "repeats": 2},
    "synth": {"n_per_cell": 10, "task_size": 30}
  })");
  const std::string cfg = (dir / "cfg.json").string();
  REQUIRE(run({"synth", "--config", cfg, "--out", (dir / "data").string()}).code == kExitOk);
  CHECK(load_manifest(dir / "data" / "pretrain.tsv").rows.size() == 90);
  CHECK(to_task_dataset(load_manifest(dir / "data" / "task.tsv")).size() == 30);

  REQUIRE(run({"cap", "--manifest", (dir / "data" / "pretrain.tsv").string(), "--cap", "4", "--out",
               (dir / "capped.tsv").string()})
              .code == kExitOk);
  CHECK(load_manifest(dir / "capped.tsv").rows.size() == 36);

  const std::string ckpt = (dir / "pre.json").string();
  REQUIRE(run({"pretrain", "--config", cfg, "--method", "supcon", "--out", ckpt}).code == kExitOk);
  CHECK(load_checkpoint(ckpt).method == "supcon");
  const std::string log = read_file(ckpt + ".log");
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  CHECK(log.rfind("0\t", 0) == 0);

  CHECK(run({"finetune", "--config", cfg, "--checkpoint", ckpt, "--out", (dir / "ft.json").string()}).code == kExitOk);
  CHECK(load_checkpoint(dir / "ft.json").classifier.has_value());
  CHECK(run({"finetune", "--config", cfg, "--out", (dir / "scratch.json").string()}).code == kExitOk);
  CHECK(load_checkpoint(dir / "scratch.json").method == "scratch");
  CHECK(run({"probe", "--config", cfg, "--checkpoint", ckpt, "--out", (dir / "probe.json").string()}).code ==
        kExitOk);
  CHECK(load_checkpoint(dir / "probe.json").model == load_checkpoint(ckpt).model.without_head());

  const std::string proj = (dir / "proj.tsv").string();
  REQUIRE(run({"project", "--manifest", (dir / "data" / "pretrain.tsv").string(), "--checkpoint", ckpt, "--out", proj})
              .code == kExitOk);
  const std::string ptext = read_file(proj);
  CHECK(ptext.rfind("id\tmodality\tanatomy\tpc1\tpc2\n", 0) == 0);
  CHECK(std::count(ptext.begin(), ptext.end(), '\n') == 91);

  const std::string report = (dir / "report.tsv").string();
  const CliRun ev = run({"evaluate", "--config", cfg, "--out", report});
  REQUIRE(ev.code == kExitOk);
  const std::string table = read_file(report);
  CHECK(table.rfind("method\tmean_auc\tp_vs_proposed\nmulsupcon\t", 0) == 0);
  CHECK(table.find("\n-\n") == std::string::npos);
  CHECK(table.find("scratch\t") != std::string::npos);
  const auto detail = nlohmann::json::parse(read_file(report + ".json"));
  CHECK(detail["methods"].size() == 2);
  CHECK(detail["methods"][0]["summary_auc"].size() == 2);
  CHECK(detail["stratified"] == true);

  const CliRun again = run({"evaluate", "--config", cfg, "--out", (dir / "report2.tsv").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(read_file(dir / "report2.tsv") == table);
  CHECK(read_file(dir / "report2.tsv.json") == read_file(report + ".json"));
}
