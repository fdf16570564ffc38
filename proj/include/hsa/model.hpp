#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hsa/dataset.hpp"
#include "hsa/encoder.hpp"
#include "hsa/hap.hpp"
#include "hsa/molgraph.hpp"
#include "hsa/params.hpp"
#include "hsa/saf.hpp"
#include "hsa/trace.hpp"

namespace hsa {

enum class TaskKind { Regression, Classification, Multilabel };

struct ModelConfig {
  int layers = 6;
  int dim = 64;
  int tokens = 8;
  int heads = 4;
  int state = 8;
  double alpha = 0.5;
  int experts = 4;
  int ff_mult = 2;  // d_ff = ff_mult·d
  ProjectorMode projectors = ProjectorMode::Both;
  bool saf = true;
  FusionMode fusion = FusionMode::Verbatim;
  bool route_motifs = true;
  Aggregation aggregation = Aggregation::Sum;
  bool learnable_eps = true;
  TaskKind task = TaskKind::Regression;
  int outputs = 1;
  std::uint64_t seed = 0;
  int motif_min_freq = 1;
};

/// Everything one forward pass produces, for training and diagnostics.
struct ForwardResult {
  HierarchicalFeatures features;
  std::vector<ProjectedTokens> blocks;
  Tensor fused;   // M×d, M = (L+1)·K
  Tensor pooled;  // d
  Tensor output;  // head width
  ForwardTrace trace;
};

class HsaModel {
 public:
  /// The motif vocabulary is built from `corpus` (usually the training split).
  HsaModel(const ModelConfig& config, const std::vector<MolGraph>& corpus);
  HsaModel(const ModelConfig& config, MotifVocabulary vocab);
  HsaModel(const HsaModel&) = delete;
  HsaModel& operator=(const HsaModel&) = delete;

  ForwardResult forward(const Molecule& mol) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const MotifVocabulary& vocabulary() const { return vocab_; }
  const GraphEncoder& encoder() const { return *encoder_; }
  const HierarchicalAdaptiveProjector& hap() const { return *hap_; }
  HierarchicalAdaptiveProjector& mutable_hap() { return *hap_; }
  const ExpertBank* experts() const { return experts_.get(); }
  const Linear& head() const { return head_; }

 private:
  void build();

  ModelConfig config_;
  MotifVocabulary vocab_;
  ParameterStore store_;
  std::unique_ptr<GraphEncoder> encoder_;
  std::unique_ptr<HierarchicalAdaptiveProjector> hap_;
  std::unique_ptr<ExpertBank> experts_;
  std::unique_ptr<SharedFusion> shared_;
  Linear head_;
};

}  // namespace hsa
