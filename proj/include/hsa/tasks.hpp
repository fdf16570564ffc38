#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsa/checkpoint.hpp"
#include "hsa/dataset.hpp"
#include "hsa/grad_check.hpp"
#include "hsa/model.hpp"

namespace hsa {

// --- exact graph-derived targets ---------------------------------------------

enum class SynthTarget { RingCount, WienerIndex, HeavyAtomCount, HeteroFraction, HasBenzene };

inline constexpr std::array<const char*, 5> kTargetNames = {"ring_count", "wiener_index", "heavy_atom_count",
                                                            "hetero_fraction", "has_benzene"};

double synth_target(const MolGraph& g, SynthTarget kind);
double synth_target(const MolGraph& g, const StructMatrices& m, SynthTarget kind);
/// All targets in kTargetNames order.
std::vector<double> synth_targets(const MolGraph& g);
SynthTarget target_from_name(const std::string& name);

/// True if six aromatic carbons close a cycle through aromatic bonds.
bool has_benzene_ring(const MolGraph& g);

/// Copy of `data` keeping only the named target columns, in the given order.
Dataset select_targets(const Dataset& data, const std::vector<std::string>& names);

// --- losses and metrics -------------------------------------------------------

/// Scalar training loss for one molecule: regression → mean smooth-L1 (β = 1),
/// classification → mean logistic cross-entropy, multilabel → summed logistic cross-entropy.
Tensor task_loss(const Tensor& outputs, const std::vector<double>& targets, TaskKind kind);

double mean_absolute_error(const std::vector<double>& pred, const std::vector<double>& target);

/// Per-column standardisation for regression targets.
struct TargetScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static TargetScaler fit(const Dataset& data);
  static TargetScaler identity(std::size_t width);
  std::vector<double> normalize(const std::vector<double>& y) const;
  std::vector<double> denormalize(const std::vector<double>& z) const;
};

// --- optimiser ----------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  int epochs = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // ≤ 0 disables clipping
  std::vector<std::string> targets;  // empty = every column of the dataset
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// Global-norm clipping followed by one bias-corrected Adam update.
/// Returns the gradient norm before clipping.
double adam_step(std::vector<Tensor>& params, AdamState& state, const TrainConfig& cfg);

// --- training and evaluation -------------------------------------------------------

struct EvalResult {
  double metric = 0.0;  // MAE in target units (regression) or accuracy (classification, multilabel)
  std::vector<std::vector<double>> predictions;  // target units, or probabilities
};

/// True when a larger metric is better for this task.
bool higher_is_better(TaskKind kind);

EvalResult evaluate(const HsaModel& model, const Dataset& data, const TargetScaler& scaler);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_metric = 0.0;
  int best_epoch = 0;
  TargetScaler scaler;
};

/// Seeded epoch loop. When `out_dir` is set, writes train_log.jsonl and best.ckpt there.
/// The parameters of the best epoch are restored into the model on return.
TrainResult train(HsaModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string format_epoch_record(const EpochRecord& r);

/// Mean task loss over `batch` (targets used as given).
Tensor batch_loss(const HsaModel& model, const Dataset& batch);

/// Central-difference check of the batch loss against the tape gradient over every parameter tensor.
FiniteDiffReport check_model_gradients(HsaModel& model, const Dataset& batch, const FiniteDiffOptions& options);

/// Model parameters plus the target scaler under "scaler.mean" / "scaler.scale".
NamedTensors checkpoint_tensors(const HsaModel& model, const TargetScaler& scaler);
TargetScaler scaler_from_checkpoint(const NamedTensors& tensors, std::size_t width);

}  // namespace hsa
