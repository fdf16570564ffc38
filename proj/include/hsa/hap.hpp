#pragma once

#include <vector>

#include "hsa/encoder.hpp"
#include "hsa/projectors.hpp"
#include "hsa/trace.hpp"

namespace hsa {

enum class ProjectorMode { Both, AttentionOnly, MambaOnly };

/// Index of the larger probability; ties go to 0 (attention).
int argmax_tie_low(double p0, double p1);

/// Hierarchical adaptive projector: one linear gate per hierarchy level picks
/// exactly one of the two shared projectors for that level's features.
class HierarchicalAdaptiveProjector {
 public:
  /// `levels` counts the gated inputs: L layers plus one motif pseudo-layer.
  HierarchicalAdaptiveProjector(const ProjectorConfig& config, int levels, ProjectorMode mode,
                                ParameterStore& store, Rng& rng);

  /// Gate probabilities p = softmax(W_g·mean_pool(H) + b_g) as a 1×2 tensor.
  Tensor gate_probs(const Tensor& h, int level) const;
  /// Numeric gate decision (no gradient bookkeeping).
  GateDecision gate(const Tensor& h, int level) const;

  /// Evaluates only the selected projector. Its output is multiplied by
  /// (1 + p_k − detach(p_k)), which is exactly 1 in value but passes gradient to the gate.
  ProjectedTokens select_and_project(const Tensor& h, int level, const SequenceLayout& layout,
                                     TokenSource source, ForwardTrace& trace) const;

  /// Z^(1..L) followed by Z^(Motif); motif routing can be bypassed (attention projector, no gate).
  std::vector<ProjectedTokens> project_all(const HierarchicalFeatures& hf, const Molecule& mol,
                                           ForwardTrace& trace, bool route_motifs = true) const;

  ProjectorMode mode() const { return mode_; }
  const CrossAttentionProjector& attention() const { return attention_; }
  const MambaProjector& mamba() const { return mamba_; }
  MambaProjector& mutable_mamba() { return mamba_; }
  const Linear& gate_layer(int level) const { return gates_.at(static_cast<std::size_t>(level)); }

 private:
  Tensor run(ProjectorKind kind, const Tensor& h, const SequenceLayout& layout, ForwardTrace& trace) const;

  ProjectorMode mode_;
  CrossAttentionProjector attention_;
  MambaProjector mamba_;
  std::vector<Linear> gates_;
};

}  // namespace hsa
