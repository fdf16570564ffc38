#include "hsa/tasks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

// --- targets -------------------------------------------------------------------

namespace {
bool aromatic_carbon(const MolGraph& g, int v) {
  const auto& a = g.atoms()[static_cast<std::size_t>(v)];
  return a.aromatic && a.is_carbon();
}

bool extend_cycle(const MolGraph& g, int start, int v, int depth, std::vector<bool>& used) {
  for (int u : g.neighbors(v)) {
    if (!aromatic_carbon(g, u)) continue;
    const auto bond = g.bond_between(v, u);
    if (g.bonds()[static_cast<std::size_t>(*bond)].order != BondOrder::Aromatic) continue;
    if (depth == 5) {
      if (u == start) return true;
      continue;
    }
    if (used[static_cast<std::size_t>(u)] || u < start) continue;
    used[static_cast<std::size_t>(u)] = true;
    const bool found = extend_cycle(g, start, u, depth + 1, used);
    used[static_cast<std::size_t>(u)] = false;
    if (found) return true;
  }
  return false;
}
}  // namespace

bool has_benzene_ring(const MolGraph& g) {
  const int n = static_cast<int>(g.num_atoms());
  std::vector<bool> used(g.num_atoms(), false);
  for (int s = 0; s < n; ++s) {
    if (!aromatic_carbon(g, s)) continue;
    used[static_cast<std::size_t>(s)] = true;
    const bool found = extend_cycle(g, s, s, 0, used);
    used[static_cast<std::size_t>(s)] = false;
    if (found) return true;
  }
  return false;
}

double synth_target(const MolGraph& g, const StructMatrices& m, SynthTarget kind) {
  const std::size_t n = g.num_atoms();
  switch (kind) {
    case SynthTarget::RingCount:
      return static_cast<double>(g.num_bonds()) - static_cast<double>(n) + 1.0;
    case SynthTarget::WienerIndex: {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) total += m.dist(i, j);
      return total;
    }
    case SynthTarget::HeavyAtomCount:
      return static_cast<double>(n);
    case SynthTarget::HeteroFraction: {
      std::size_t hetero = 0;
      for (const auto& a : g.atoms()) hetero += a.is_heteroatom() ? 1 : 0;
      return n == 0 ? 0.0 : static_cast<double>(hetero) / static_cast<double>(n);
    }
    case SynthTarget::HasBenzene:
      return has_benzene_ring(g) ? 1.0 : 0.0;
  }
  return 0.0;
}

double synth_target(const MolGraph& g, SynthTarget kind) {
  if (kind == SynthTarget::WienerIndex) return synth_target(g, struct_matrices(g), kind);
  return synth_target(g, StructMatrices{}, kind);
}

std::vector<double> synth_targets(const MolGraph& g) {
  const auto m = struct_matrices(g);
  std::vector<double> out;
  for (std::size_t i = 0; i < kTargetNames.size(); ++i) out.push_back(synth_target(g, m, static_cast<SynthTarget>(i)));
  return out;
}

SynthTarget target_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kTargetNames.size(); ++i) {
    if (name == kTargetNames[i]) return static_cast<SynthTarget>(i);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown target " + name);
}

Dataset select_targets(const Dataset& data, const std::vector<std::string>& names) {
  std::vector<int> cols;
  for (const auto& name : names) {
    const int c = data.target_index(name);
    if (c < 0) throw Error(ErrorCode::TargetWidthMismatch, "dataset has no target column " + name);
    cols.push_back(c);
  }
  Dataset out;
  out.target_names = names;
  out.molecules.reserve(data.size());
  for (const auto& mol : data.molecules) {
    Molecule copy = mol;
    copy.targets.clear();
    for (int c : cols) copy.targets.push_back(mol.targets.at(static_cast<std::size_t>(c)));
    out.molecules.push_back(std::move(copy));
  }
  return out;
}

// --- losses and metrics ----------------------------------------------------------

Tensor task_loss(const Tensor& outputs, const std::vector<double>& targets, TaskKind kind) {
  if (outputs.numel() != targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "head width " + std::to_string(outputs.numel()) + " vs " +
                                              std::to_string(targets.size()) + " targets");
  }
  Tensor y = Tensor(outputs.shape(), targets);
  switch (kind) {
    case TaskKind::Regression:
      return mean(smooth_l1(outputs, y, 1.0));
    case TaskKind::Classification:
      return mean(bce_with_logits(outputs, y));
    case TaskKind::Multilabel:
      return sum(bce_with_logits(outputs, y));
  }
  return Tensor::scalar(0.0);
}

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size()) throw Error(ErrorCode::ShapeMismatch, "MAE length mismatch");
  if (pred.empty()) throw Error(ErrorCode::EmptyDataset, "MAE of nothing");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - target[i]);
  return total / static_cast<double>(pred.size());
}

TargetScaler TargetScaler::fit(const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a scaler on no molecules");
  const std::size_t w = data.target_width();
  TargetScaler s;
  s.mean.assign(w, 0.0);
  s.scale.assign(w, 0.0);
  const double n = static_cast<double>(data.size());
  for (const auto& mol : data.molecules)
    for (std::size_t c = 0; c < w; ++c) s.mean[c] += mol.targets[c] / n;
  for (const auto& mol : data.molecules)
    for (std::size_t c = 0; c < w; ++c) s.scale[c] += (mol.targets[c] - s.mean[c]) * (mol.targets[c] - s.mean[c]) / n;
  for (auto& v : s.scale) v = v > 1e-12 ? std::sqrt(v) : 1.0;
  return s;
}

TargetScaler TargetScaler::identity(std::size_t width) {
  return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

std::vector<double> TargetScaler::normalize(const std::vector<double>& y) const {
  std::vector<double> z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = (y[i] - mean[i]) / scale[i];
  return z;
}

std::vector<double> TargetScaler::denormalize(const std::vector<double>& z) const {
  std::vector<double> y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] * scale[i] + mean[i];
  return y;
}

// --- optimiser -----------------------------------------------------------------------

double adam_step(std::vector<Tensor>& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
    state.step = 0;
  }
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.impl()->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = cfg.clip_norm > 0.0 && norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (!p.has_grad()) continue;
    const auto& grad = p.impl()->grad;
    auto values = p.mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j] * clip;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      values[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
  return norm;
}

// --- training ----------------------------------------------------------------------

bool higher_is_better(TaskKind kind) { return kind != TaskKind::Regression; }

EvalResult evaluate(const HsaModel& model, const Dataset& data, const TargetScaler& scaler) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "evaluation set is empty");
  const TaskKind kind = model.config().task;
  NoGradScope no_grad;
  EvalResult result;
  std::vector<double> pred_flat, target_flat;
  std::size_t correct = 0, total = 0;
  for (const auto& mol : data.molecules) {
    if (mol.targets.size() != static_cast<std::size_t>(model.config().outputs)) {
      throw Error(ErrorCode::TargetWidthMismatch, "molecule " + mol.smiles + " has the wrong target width");
    }
    const auto out = model.forward(mol).output;
    std::vector<double> raw(out.values().begin(), out.values().end());
    if (kind == TaskKind::Regression) {
      auto pred = scaler.denormalize(raw);
      pred_flat.insert(pred_flat.end(), pred.begin(), pred.end());
      target_flat.insert(target_flat.end(), mol.targets.begin(), mol.targets.end());
      result.predictions.push_back(std::move(pred));
    } else {
      std::vector<double> prob(raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) {
        prob[i] = sigmoid_value(raw[i]);
        correct += (raw[i] > 0.0) == (mol.targets[i] >= 0.5) ? 1 : 0;
        ++total;
      }
      result.predictions.push_back(std::move(prob));
    }
  }
  result.metric = kind == TaskKind::Regression ? mean_absolute_error(pred_flat, target_flat)
                                               : static_cast<double>(correct) / static_cast<double>(total);
  return result;
}

std::string format_epoch_record(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_metric"] = r.val_metric;
  j["seconds"] = r.seconds;
  return j.dump();
}

Tensor batch_loss(const HsaModel& model, const Dataset& batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  Tensor total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& mol = batch.molecules[i];
    Tensor l = task_loss(model.forward(mol).output, mol.targets, model.config().task);
    total = i == 0 ? l : add(total, l);
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

FiniteDiffReport check_model_gradients(HsaModel& model, const Dataset& batch, const FiniteDiffOptions& options) {
  return finite_diff_check([&] { return batch_loss(model, batch); }, model.params().tensors(), options);
}

NamedTensors checkpoint_tensors(const HsaModel& model, const TargetScaler& scaler) {
  NamedTensors out = model.params().entries();
  out.emplace_back("scaler.mean", Tensor::vector(scaler.mean));
  out.emplace_back("scaler.scale", Tensor::vector(scaler.scale));
  return out;
}

TargetScaler scaler_from_checkpoint(const NamedTensors& tensors, std::size_t width) {
  TargetScaler s = TargetScaler::identity(width);
  for (const auto& [name, t] : tensors) {
    if (name == "scaler.mean") s.mean.assign(t.values().begin(), t.values().end());
    if (name == "scaler.scale") s.scale.assign(t.values().begin(), t.values().end());
  }
  if (s.mean.size() != width || s.scale.size() != width) {
    throw Error(ErrorCode::TargetWidthMismatch, "checkpoint scaler width");
  }
  return s;
}

TrainResult train(HsaModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  const auto width = static_cast<std::size_t>(model.config().outputs);
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& mol : set->molecules) {
      if (mol.targets.size() != width) {
        throw Error(ErrorCode::TargetWidthMismatch, "expected " + std::to_string(width) + " targets for " + mol.smiles);
      }
    }
  }
  if (cfg.batch_size == 0 || cfg.epochs < 0 || cfg.learning_rate < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "batch size, epochs and learning rate must be positive");
  }
  const TaskKind kind = model.config().task;
  TrainResult result;
  result.scaler = kind == TaskKind::Regression ? TargetScaler::fit(train_set) : TargetScaler::identity(width);
  const Dataset& val = val_set.empty() ? train_set : val_set;

  std::vector<std::vector<double>> targets;
  for (const auto& mol : train_set.molecules) {
    targets.push_back(kind == TaskKind::Regression ? result.scaler.normalize(mol.targets) : mol.targets);
  }

  std::ofstream log_file;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    log_file.open(*out_dir / "train_log.jsonl", std::ios::binary);
    if (!log_file) throw Error(ErrorCode::Io, "cannot write " + (*out_dir / "train_log.jsonl").string());
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  auto params = model.params().tensors();
  AdamState adam;
  std::vector<std::vector<double>> best;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      model.params().zero_grad();
      Tape tape;
      TapeScope scope(tape);
      Tensor batch_loss;
      for (std::size_t i = b; i < end; ++i) {
        const auto& mol = train_set.molecules[order[i]];
        Tensor l = task_loss(model.forward(mol).output, targets[order[i]], kind);
        batch_loss = i == b ? l : add(batch_loss, l);
      }
      batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - b));
      loss_total += batch_loss.item() * static_cast<double>(end - b);
      tape.backward(batch_loss);
      adam_step(params, adam, cfg);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(order.size());
    rec.val_metric = evaluate(model, val, result.scaler).metric;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);

    const bool better = !have_best || (higher_is_better(kind) ? rec.val_metric > result.best_metric
                                                              : rec.val_metric < result.best_metric);
    if (better) {
      have_best = true;
      result.best_metric = rec.val_metric;
      result.best_epoch = epoch;
      best = model.params().snapshot();
      if (out_dir) save_checkpoint(*out_dir / "best.ckpt", checkpoint_tensors(model, result.scaler));
    }
    if (log_file) log_file << format_epoch_record(rec) << '\n' << std::flush;
  }
  if (have_best) {
    model.params().restore(best);
  } else {
    result.best_metric = evaluate(model, val, result.scaler).metric;
  }
  return result;
}

}  // namespace hsa
