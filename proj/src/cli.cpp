#include "hsa/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsa/checkpoint.hpp"
#include "hsa/config.hpp"
#include "hsa/diagnostics.hpp"
#include "hsa/error.hpp"
#include "hsa/generator.hpp"
#include "hsa/tasks.hpp"

namespace hsa {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string dataset;
  std::string model;
  std::optional<std::size_t> count;
  std::optional<int> max_atoms;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c;
  c.set_seed(c.seed);
  if (!o.config.empty()) c = load_config(o.config, c);
  if (o.seed) c.set_seed(*o.seed);
  if (o.count) c.generator.count = *o.count;
  if (o.max_atoms) c.generator.max_atoms = *o.max_atoms;
  return c;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> default_targets(const RunConfig& c) {
  if (!c.train.targets.empty()) return c.train.targets;
  return {c.model.task == TaskKind::Regression ? "wiener_index" : "has_benzene"};
}

Dataset load_or_generate(const Options& o, const RunConfig& c) {
  if (!o.dataset.empty()) return read_dataset(o.dataset);
  return generate_dataset(c.generator);
}

/// A trained model directory: config.txt, vocab.txt and best.ckpt.
struct TrainedModel {
  RunConfig config;
  std::unique_ptr<HsaModel> model;
  TargetScaler scaler;
};

TrainedModel load_trained(const fs::path& dir) {
  TrainedModel t;
  t.config = apply_config(RunConfig{}, parse_key_values(read_text(dir / "config.txt")));
  auto vocab = MotifVocabulary::deserialize(read_text(dir / "vocab.txt"));
  t.model = std::make_unique<HsaModel>(t.config.model, std::move(vocab));
  const auto tensors = load_checkpoint(dir / "best.ckpt");
  load_into(t.model->params(), tensors);
  t.scaler = scaler_from_checkpoint(tensors, static_cast<std::size_t>(t.config.model.outputs));
  return t;
}

std::unique_ptr<HsaModel> model_for(const Options& o, const RunConfig& c, const Dataset& data) {
  if (!o.model.empty()) return std::move(load_trained(o.model).model);
  return std::make_unique<HsaModel>(c.model, graphs_of(data));
}

std::vector<int> benzene_labels(const Dataset& data) {
  std::vector<int> labels;
  for (const auto& mol : data.molecules) labels.push_back(has_benzene_ring(mol.graph) ? 1 : 0);
  return labels;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const RunConfig c = resolve_config(o);
  const Dataset data = generate_dataset(c.generator);
  const fs::path path = fs::path(o.out) / "dataset.tsv";
  write_text(path, format_dataset(data));
  out << "wrote " << data.size() << " molecules to " << path.string() << '\n';
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  RunConfig c = resolve_config(o);
  c.train.targets = default_targets(c);
  c.model.outputs = static_cast<int>(c.train.targets.size());
  const Dataset data = select_targets(load_or_generate(o, c), c.train.targets);
  auto [train_set, val_set] = split_dataset(data, c.train_fraction, c.seed);
  HsaModel model(c.model, graphs_of(train_set));
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "config.txt", format_config(c));
  write_text(dir / "vocab.txt", model.vocabulary().serialize());
  const auto result = train(model, train_set, val_set, c.train, dir);

  nlohmann::ordered_json metrics;
  metrics["metric"] = higher_is_better(c.model.task) ? "accuracy" : "mae";
  metrics["best_metric"] = result.best_metric;
  metrics["best_epoch"] = result.best_epoch;
  metrics["train_size"] = train_set.size();
  metrics["val_size"] = val_set.size();
  write_text(dir / "metrics.json", metrics.dump() + "\n");
  out << "best " << metrics["metric"].get<std::string>() << " " << format_number(result.best_metric) << " at epoch "
      << result.best_epoch << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.model.empty()) throw CLI::RequiredError("--model");
  if (o.dataset.empty()) throw CLI::RequiredError("--dataset");
  auto trained = load_trained(o.model);
  const Dataset data = select_targets(read_dataset(o.dataset), default_targets(trained.config));
  const auto result = evaluate(*trained.model, data, trained.scaler);
  const auto strata = size_stratified_eval(*trained.model, data, trained.scaler, trained.config.bin_width);
  const fs::path dir(o.out);
  nlohmann::ordered_json metrics;
  metrics["metric"] = higher_is_better(trained.config.model.task) ? "accuracy" : "mae";
  metrics["value"] = result.metric;
  metrics["molecules"] = data.size();
  write_text(dir / "eval_metrics.json", metrics.dump() + "\n");
  write_text(dir / "strata.csv", strata_csv(strata));
  out << metrics["metric"].get<std::string>() << " " << format_number(result.metric) << '\n';
  return 0;
}

int cmd_diagnose(const Options& o, std::ostream& out) {
  const RunConfig c = resolve_config(o);
  const Dataset data = load_or_generate(o, c);
  if (data.size() < 2) throw Error(ErrorCode::EmptyDataset, "diagnostics need at least two molecules");
  const auto model = model_for(o, c, data);
  const fs::path dir(o.out);

  const auto curve = oversmoothing_curve(model->encoder(), data);
  write_text(dir / "oversmoothing.csv", oversmoothing_csv(curve));

  std::string disp = "layer,projector,dispersion\n";
  for (int l = 1; l <= model->config().layers + 1; ++l) {
    for (auto kind : {ProjectorKind::Attention, ProjectorKind::Mamba}) {
      disp += std::to_string(l) + "," + (kind == ProjectorKind::Attention ? "attention" : "mamba") + "," +
              format_number(dispersion_trend(*model, data, l, kind)) + "\n";
    }
  }
  write_text(dir / "dispersion.csv", disp);

  const auto features = molecule_features(*model, data);
  const auto labels = benzene_labels(data);
  const auto pca = pca_embed(features, c.seed);
  write_text(dir / "embed.csv", embed_csv(pca, labels));
  nlohmann::ordered_json summary;
  summary["degenerate_covariance"] = pca.degenerate;
  bool two_classes = false;
  for (int l : labels) two_classes = two_classes || l != labels.front();
  if (two_classes) summary["cluster_separation"] = cluster_separation(features, labels);
  write_text(dir / "separation.json", summary.dump() + "\n");
  if (pca.degenerate) out << "warning: feature covariance is zero, embedding left at the origin\n";
  out << "layer " << curve.size() << " cos_sim " << format_number(curve.back()) << " (layer 1 " << format_number(curve.front())
      << ")\n";
  return 0;
}

int cmd_gating_report(const Options& o, std::ostream& out) {
  const RunConfig c = resolve_config(o);
  const Dataset data = load_or_generate(o, c);
  const auto model = model_for(o, c, data);
  const fs::path dir(o.out);
  const auto ratios = gating_ratio_report(*model, data);
  write_text(dir / "gating.csv", gating_csv(ratios));
  if (model->experts()) write_text(dir / "experts.csv", experts_csv(expert_load_histogram(*model, data)));
  for (std::size_t l = 0; l < ratios.size(); ++l) out << "layer " << l + 1 << " mamba_ratio " << format_number(ratios[l]) << '\n';
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  RunConfig c = resolve_config(o);
  c.train.targets = default_targets(c);
  c.model.outputs = static_cast<int>(c.train.targets.size());
  const Dataset data = select_targets(load_or_generate(o, c), c.train.targets);
  auto [train_set, val_set] = split_dataset(data, c.train_fraction, c.seed);
  ExperimentSpec spec;
  spec.variants = standard_ablation();
  spec.model = c.model;
  spec.train = c.train;
  const auto rows = run_ablation(spec, train_set, val_set);
  write_text(fs::path(o.out) / "ablation.csv", ablation_csv(rows));
  for (const auto& r : rows) out << r.variant << " " << format_number(r.metric) << '\n';
  return 0;
}

int cmd_grad_check(const Options& o, std::ostream& out) {
  RunConfig c;
  c.model.dim = 16;
  c.model.layers = 3;
  c.model.tokens = 3;
  c.model.heads = 2;
  c.model.state = 4;
  c.set_seed(3);
  if (!o.config.empty()) c = load_config(o.config, c);
  if (o.seed) c.set_seed(*o.seed);
  Dataset batch;
  batch.target_names = {"y"};
  batch.molecules.push_back(prepare_molecule("c1ccccc1CCO", {0.3}));
  batch.molecules.push_back(prepare_molecule("CC(=O)NC1CCCCC1", {-0.5}));
  batch.molecules.push_back(prepare_molecule("CCOc1ccncc1C", {1.2}));
  c.model.outputs = 1;
  c.model.task = TaskKind::Regression;
  HsaModel model(c.model, graphs_of(batch));
  FiniteDiffOptions opts;
  opts.max_coords_per_tensor = 6;
  opts.seed = c.seed;
  const auto report = check_model_gradients(model, batch, opts);
  out << "max_rel_error " << format_number(report.max_rel_error) << " over " << report.coords_checked
      << " coordinates (worst " << model.params().entries()[report.worst_tensor].first << ")\n";
  return report.max_rel_error < 1e-4 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hierarchical molecular representation toolkit", "hsa_net"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "seed for every random choice");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--dataset", o.dataset, "tab-separated dataset file")->check(CLI::ExistingFile);
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic molecule dataset");
  add_common(gen);
  gen->add_option("--count", o.count, "number of molecules");
  gen->add_option("--max-atoms", o.max_atoms, "largest heavy-atom count");
  auto* train_cmd = app.add_subcommand("train", "train a model and keep the best checkpoint");
  add_common(train_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a trained model, overall and by molecule size");
  add_common(eval_cmd);
  eval_cmd->add_option("--model", o.model, "directory written by train");
  auto* diag = app.add_subcommand("diagnose", "over-smoothing, dispersion and embedding exports");
  add_common(diag);
  diag->add_option("--model", o.model, "directory written by train");
  auto* gating = app.add_subcommand("gating-report", "per-layer projector selection and expert load");
  add_common(gating);
  gating->add_option("--model", o.model, "directory written by train");
  auto* ablate = app.add_subcommand("ablate", "train the projector and fusion ablation variants");
  add_common(ablate);
  auto* grad = app.add_subcommand("grad-check", "finite-difference check of the full model");
  add_common(grad);

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (eval_cmd->parsed()) return cmd_eval(o, out);
    if (diag->parsed()) return cmd_diagnose(o, out);
    if (gating->parsed()) return cmd_gating_report(o, out);
    if (ablate->parsed()) return cmd_ablate(o, out);
    if (grad->parsed()) return cmd_grad_check(o, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hsa
