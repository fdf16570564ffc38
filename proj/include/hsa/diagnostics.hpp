#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsa/dataset.hpp"
#include "hsa/encoder.hpp"
#include "hsa/model.hpp"
#include "hsa/tasks.hpp"

namespace hsa {

/// Mean cosine similarity over all unordered node-row pairs; rows ≥ 2.
double mean_pairwise_cosine(const Tensor& h);

/// Per layer l = 1..L: mean over molecules (≥ 2 atoms) of the mean pairwise cosine
/// similarity of H^(l). Single-atom molecules are skipped.
std::vector<double> oversmoothing_curve(const GraphEncoder& encoder, const Dataset& data);

/// Mean Euclidean distance to the centroid after scaling each point to unit norm.
double dispersion(const std::vector<std::vector<double>>& points);

/// Dispersion of molecule vectors (mean of projected tokens) for one hierarchy
/// level (1..L, L+1 = motifs) pushed through the given projector regardless of the gate.
double dispersion_trend(const HsaModel& model, const Dataset& data, int layer, ProjectorKind projector);

struct PcaResult {
  std::vector<std::array<double, 2>> coords;  // M rows
  std::vector<std::array<double, 2>> components;  // d rows: the two principal directions as columns
  std::array<double, 2> variances{0.0, 0.0};
  bool degenerate = false;  // zero variance: coordinates are all zero
};

/// Centre, then find the top two principal directions by power iteration with
/// deflation (tolerance 1e-9, at most 1000 iterations), and project.
PcaResult pca_embed(const std::vector<std::vector<double>>& features, std::uint64_t seed = 0);

/// Mean distance between class centroids divided by the mean distance of points to
/// their own class centroid (averaged over classes). Needs at least two classes.
double cluster_separation(const std::vector<std::vector<double>>& features, const std::vector<int>& labels);

/// Pooled fused representation of every molecule.
std::vector<std::vector<double>> molecule_features(const HsaModel& model, const Dataset& data);

struct StratumRow {
  int bin_lo = 0;
  int bin_hi = 0;
  std::size_t count = 0;
  double metric = 0.0;
};

struct StratifiedReport {
  std::vector<StratumRow> rows;     // non-empty bins only, ascending
  std::map<int, std::size_t> histogram;  // atom count → molecules
};

/// Metrics within half-open atom-count bins [k·w, (k+1)·w).
StratifiedReport size_stratified_eval(const HsaModel& model, const Dataset& data, const TargetScaler& scaler,
                                      int bin_width);

/// Fraction of molecules routed to the state-space projector at each level 1..L+1.
std::vector<double> gating_ratio_report(const HsaModel& model, const Dataset& data);

/// Tokens routed to each expert over the dataset.
std::vector<std::size_t> expert_load_histogram(const HsaModel& model, const Dataset& data);

// --- ablation -------------------------------------------------------------------

struct AblationVariant {
  std::string name;
  bool attention = true;
  bool mamba = true;
  bool saf = true;
};

/// Throws InvalidToggleCombination when both projectors are disabled.
void validate_variant(const AblationVariant& v);
ModelConfig apply_variant(ModelConfig base, const AblationVariant& v);

/// Attention-only, mamba-only and both, each with and without source-aware fusion.
std::vector<AblationVariant> standard_ablation();

struct AblationRow {
  std::string variant;
  double metric = 0.0;
  int best_epoch = 0;
  std::size_t hap_gate_calls = 0;
  std::size_t saf_gate_tokens = 0;
};

struct ExperimentSpec {
  std::vector<AblationVariant> variants;
  ModelConfig model;
  TrainConfig train;
};

/// Trains and evaluates each variant with identical data and seeds.
std::vector<AblationRow> run_ablation(const ExperimentSpec& spec, const Dataset& train_set, const Dataset& val_set);

// --- CSV artifacts ----------------------------------------------------------------

std::string oversmoothing_csv(const std::vector<double>& curve);
std::string gating_csv(const std::vector<double>& ratios);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string strata_csv(const StratifiedReport& report);
std::string embed_csv(const PcaResult& pca, const std::vector<int>& labels);
std::string experts_csv(const std::vector<std::size_t>& counts);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace hsa
