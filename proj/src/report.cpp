#include "modan/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "modan/error.hpp"
#include "modan/seeding.hpp"

namespace modan {

using nlohmann::json;

const CvReport& EvaluationResult::report(const std::string& method) const {
  for (const auto& r : reports) {
    if (r.method == method) return r;
  }
  throw Error(ErrorCode::kBadConfig, "no report for method '" + method + "'");
}

namespace {

MethodRunner downstream_runner(const EncoderModel* pretrained, const RunConfig& cfg,
                               std::size_t input_dim) {
  return [pretrained, &cfg, input_dim](const LabeledDataset& train, const Matrix& test,
                                       const CvContext& ctx) {
    DownstreamConfig ds = cfg.downstream_config();
    ds.seed = derive_seed(ctx.seed, "downstream", ctx.fold);
    const EncoderModel encoder =
        pretrained ? *pretrained
                   : fresh_encoder(cfg.architecture(), input_dim, derive_seed(ctx.seed, "init", ctx.fold));
    const DownstreamResult trained = train_downstream(encoder, train, ds);
    return predict_scores(trained.encoder, trained.head, test);
  };
}

}  // namespace

EvaluationResult run_evaluation(const RunConfig& cfg, const Manifest& corpus, const Manifest& task) {
  cfg.validate();
  const auto& eval = cfg.evaluate();
  const LabeledDataset task_data = to_task_dataset(task);
  if (corpus.feature_dim() != task.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "pretraining and task manifests differ in feature dimension");
  }

  EvaluationResult result;
  result.proposed = eval.proposed;
  result.regime = cfg.downstream_config().regime == DownstreamRegime::kFinetune ? "finetune" : "linear_probe";
  result.partition = kfold_split(task_data.labels, eval.folds, derive_seed(cfg.seed, "fold", 0));

  const std::uint64_t cv_seed = derive_seed(cfg.seed, "downstream", 0);
  const PretrainDataset corpus_data = to_pretrain_dataset(corpus);

  for (const auto& name : eval.methods) {
    std::optional<EncoderModel> pretrained;
    if (name != kScratchMethod) {
      PretrainConfig pc = cfg.pretrain_config(parse_pretrain_method(name));
      pc.seed = derive_seed(cfg.seed, "pretrain", 0);
      PretrainResult pr = pretrain(corpus_data, pc);
      result.pretrain_logs[name] = pr.log;
      pretrained = std::move(pr.model);
    }
    const MethodRunner runner = downstream_runner(pretrained ? &*pretrained : nullptr, cfg,
                                                  static_cast<std::size_t>(task_data.features.cols()));
    CvReport rep = repeated_cv(task_data, runner, result.partition, eval.repeats, cv_seed, name);
    rep.config_fingerprint = cfg.fingerprint();
    result.reports.push_back(std::move(rep));
  }

  const CvReport& proposed = result.report(eval.proposed);
  for (const auto& rep : result.reports) {
    if (rep.method == eval.proposed) continue;
    ComparisonResult cmp = wilcoxon_signed_rank(proposed.summary, rep.summary);
    cmp.method_a = proposed.method;
    cmp.method_b = rep.method;
    result.vs_proposed[rep.method] = cmp;
  }
  return result;
}

EvaluationResult run_evaluation(const RunConfig& cfg) {
  if (cfg.pretrain_manifest.empty() || cfg.task_manifest.empty()) {
    throw Error(ErrorCode::kBadConfig, "evaluate needs pretrain_manifest and task_manifest");
  }
  return run_evaluation(cfg, load_manifest(cfg.pretrain_manifest), load_manifest(cfg.task_manifest));
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string format_report_table(const EvaluationResult& result) {
  std::string out = "method\tmean_auc\tp_vs_proposed\n";
  for (const auto& rep : result.reports) {
    out += rep.method + '\t' + fixed6(rep.mean_summary()) + '\t';
    out += rep.method == result.proposed ? std::string("-") : fixed6(result.vs_proposed.at(rep.method).p_value);
    out += '\n';
  }
  return out;
}

std::string format_report_detail(const EvaluationResult& result, const RunConfig& cfg) {
  json doc;
  doc["config_fingerprint"] = cfg.fingerprint();
  doc["regime"] = result.regime;
  doc["proposed"] = result.proposed;
  doc["folds"] = result.partition.k;
  doc["stratified"] = true;
  doc["partition_hash"] = result.partition.hash();
  doc["partition"] = result.partition.assignment;
  json methods = json::array();
  for (const auto& rep : result.reports) {
    json m{{"method", rep.method},
           {"mean_auc", rep.mean_summary()},
           {"summary_auc", rep.summary},
           {"fold_auc", rep.fold_aucs},
           {"partition_hashes", rep.partition_hashes}};
    if (auto it = result.vs_proposed.find(rep.method); it != result.vs_proposed.end()) {
      const auto& c = it->second;
      m["comparison"] = {{"w_plus", c.w_plus},
                         {"w_minus", c.w_minus},
                         {"statistic", c.statistic},
                         {"p_value", c.p_value},
                         {"n_effective", c.n_effective},
                         {"exact", c.exact},
                         {"degenerate", c.degenerate},
                         {"significant_0_05", c.p_value < 0.05}};
    }
    if (auto it = result.pretrain_logs.find(rep.method); it != result.pretrain_logs.end()) {
      m["pretrain_first_loss"] = it->second.front().mean_loss;
      m["pretrain_final_loss"] = it->second.back().mean_loss;
    }
    methods.push_back(std::move(m));
  }
  doc["methods"] = std::move(methods);
  return doc.dump(1) + "\n";
}

std::string format_loss_log(const std::vector<EpochLog>& log) {
  std::string out;
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.9f\t%zu\n", e.epoch, e.mean_loss, e.anchors_skipped);
    out += buf;
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace modan
