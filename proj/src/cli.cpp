#include "modan/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>

#include "modan/checkpoint.hpp"
#include "modan/config.hpp"
#include "modan/error.hpp"
#include "modan/eval_stats.hpp"
#include "modan/manifest.hpp"
#include "modan/report.hpp"
#include "modan/synthetic.hpp"
#include "modan/trainer.hpp"

namespace modan {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config, "JSON run configuration");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "master seed (overrides the config)");
  cmd->add_option("--out", opts.out, "output path")->required();
}

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config.empty() ? RunConfig() : RunConfig::load(opts.config);
  if (opts.seed) cfg.set_seed(*opts.seed);
  return cfg;
}

fs::path pick_manifest(const std::string& flag, const fs::path& from_config, const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw Error(ErrorCode::kBadConfig, std::string("no ") + what + " manifest given (--manifest)");
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modality- and anatomy-aware multi-label supervised contrastive pretraining"};
  app.name("modan");
  app.require_subcommand(1);

  // synth
  CommonOptions synth_opts;
  std::optional<std::size_t> synth_n;
  std::optional<double> synth_sigma;
  std::optional<std::size_t> synth_dim;
  auto* synth = app.add_subcommand("synth", "generate the synthetic hierarchical corpus and task");
  add_common(synth, synth_opts, false);
  synth->add_option("--n-per-cell", synth_n, "samples per (modality, anatomy) cell");
  synth->add_option("--sigma", synth_sigma, "within-cell noise sigma");
  synth->add_option("--latent-dim", synth_dim, "feature dimension");

  // cap
  CommonOptions cap_opts;
  std::string cap_manifest;
  std::size_t cap_value = 100;
  auto* cap = app.add_subcommand("cap", "keep at most N randomly chosen rows per class");
  add_common(cap, cap_opts, false);
  cap->add_option("--manifest", cap_manifest, "input manifest")->required();
  cap->add_option("--cap", cap_value, "rows kept per class")->capture_default_str();

  // pretrain
  CommonOptions pre_opts;
  std::string pre_manifest, pre_method;
  auto* pre = app.add_subcommand("pretrain", "pretrain an encoder on a metadata-labeled manifest");
  add_common(pre, pre_opts, false);
  pre->add_option("--manifest", pre_manifest, "pretraining manifest");
  pre->add_option("--method", pre_method, "mulsupcon|infonce|supcon|crossentropy");

  // finetune / probe
  CommonOptions ft_opts, probe_opts;
  std::string ft_manifest, ft_ckpt, probe_manifest, probe_ckpt;
  auto* ft = app.add_subcommand("finetune", "train encoder and head on a binary task");
  add_common(ft, ft_opts, false);
  ft->add_option("--manifest", ft_manifest, "task manifest");
  ft->add_option("--checkpoint", ft_ckpt, "pretrained checkpoint (omit for random init)");
  auto* probe = app.add_subcommand("probe", "train a linear head on a frozen encoder");
  add_common(probe, probe_opts, false);
  probe->add_option("--manifest", probe_manifest, "task manifest");
  probe->add_option("--checkpoint", probe_ckpt, "pretrained checkpoint")->required();

  // evaluate
  CommonOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "repeated k-fold comparison with Wilcoxon tests");
  add_common(evaluate, eval_opts, true);

  // project
  CommonOptions proj_opts;
  std::string proj_manifest, proj_ckpt;
  auto* project = app.add_subcommand("project", "2-D principal-component dump of embeddings");
  add_common(project, proj_opts, false);
  project->add_option("--manifest", proj_manifest, "manifest to embed")->required();
  project->add_option("--checkpoint", proj_ckpt, "encoder checkpoint")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  try {
    if (synth->parsed()) {
      RunConfig cfg = resolve_config(synth_opts);
      SynthConfig sc = cfg.synth();
      if (synth_n) sc.n_per_cell = *synth_n;
      if (synth_sigma) sc.noise_sigma = *synth_sigma;
      if (synth_dim) sc.latent_dim = *synth_dim;
      const SyntheticCorpus corpus = generate_hierarchical_corpus(cfg.synth_vocab(), sc);
      const fs::path dir(synth_opts.out);
      fs::create_directories(dir);
      save_manifest(corpus.pretrain_manifest(), dir / "pretrain.tsv");
      save_manifest(corpus.task_manifest(), dir / "task.tsv");
      out << "wrote " << corpus.pretrain.size() << " pretraining rows and " << corpus.task.size()
          << " task rows to " << dir.string() << "\n";
    } else if (cap->parsed()) {
      RunConfig cfg = resolve_config(cap_opts);
      const Manifest capped = cap_per_class(load_manifest(cap_manifest), cap_value, cfg.seed);
      save_manifest(capped, cap_opts.out);
      out << "kept " << capped.rows.size() << " rows\n";
    } else if (pre->parsed()) {
      RunConfig cfg = resolve_config(pre_opts);
      if (!pre_method.empty()) cfg.set_pretrain_method(parse_pretrain_method(pre_method));
      const PretrainConfig pc = cfg.pretrain_config();
      const Manifest manifest = load_manifest(pick_manifest(pre_manifest, cfg.pretrain_manifest, "pretraining"));
      const PretrainResult result = pretrain(to_pretrain_dataset(manifest), pc);
      save_checkpoint({result.model, std::nullopt, std::string(to_string(pc.method)), pc.seed}, pre_opts.out);
      write_text(pre_opts.out + ".log", format_loss_log(result.log));
      out << "final loss " << result.log.back().mean_loss << "\n";
    } else if (ft->parsed() || probe->parsed()) {
      const bool is_probe = probe->parsed();
      const CommonOptions& opts = is_probe ? probe_opts : ft_opts;
      RunConfig cfg = resolve_config(opts);
      const std::string& manifest_flag = is_probe ? probe_manifest : ft_manifest;
      const std::string& ckpt_path = is_probe ? probe_ckpt : ft_ckpt;
      const LabeledDataset task =
          to_task_dataset(load_manifest(pick_manifest(manifest_flag, cfg.task_manifest, "task")));
      DownstreamConfig dc = cfg.downstream_config();
      dc.regime = is_probe ? DownstreamRegime::kLinearProbe : DownstreamRegime::kFinetune;
      std::string method = kScratchMethod;
      EncoderModel encoder;
      if (!ckpt_path.empty()) {
        Checkpoint ck = load_checkpoint(ckpt_path);
        encoder = std::move(ck.model);
        method = ck.method;
      } else {
        encoder = fresh_encoder(cfg.architecture(), static_cast<std::size_t>(task.features.cols()),
                                cfg.seed);
      }
      const DownstreamResult trained = train_downstream(encoder, task, dc);
      save_checkpoint({trained.encoder, trained.head, method, cfg.seed}, opts.out);
      const Eigen::VectorXd scores = predict_scores(trained.encoder, trained.head, task.features);
      out << "training AUC " << fmt6(auc(scores, task.labels)) << "\n";
    } else if (evaluate->parsed()) {
      RunConfig cfg = resolve_config(eval_opts);
      const EvaluationResult result = run_evaluation(cfg);
      const std::string table = format_report_table(result);
      write_text(eval_opts.out, table);
      write_text(eval_opts.out + ".json", format_report_detail(result, cfg));
      out << table;
    } else if (project->parsed()) {
      const Checkpoint ck = load_checkpoint(proj_ckpt);
      const Manifest manifest = load_manifest(proj_manifest);
      const Matrix z = forward(ck.model, feature_matrix(manifest)).output;
      const Projection2d proj = project_2d(z);
      std::string text = "id\tmodality\tanatomy\tpc1\tpc2\n";
      char buf[96];
      for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
        const auto& row = manifest.rows[i];
        std::snprintf(buf, sizeof(buf), "\t%.9f\t%.9f\n", proj.coords(static_cast<Eigen::Index>(i), 0),
                      proj.coords(static_cast<Eigen::Index>(i), 1));
        text += row.id + '\t' + row.modality + '\t' + row.anatomy + buf;
      }
      write_text(proj_opts.out, text);
      out << "component variances " << proj.variances(0) << " " << proj.variances(1) << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation_error(e.code()) ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace modan
