#include "hsa/hap.hpp"

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

int argmax_tie_low(double p0, double p1) { return p1 > p0 ? 1 : 0; }

HierarchicalAdaptiveProjector::HierarchicalAdaptiveProjector(const ProjectorConfig& config, int levels,
                                                             ProjectorMode mode, ParameterStore& store, Rng& rng)
    : mode_(mode), attention_(config, store, rng), mamba_(config, store, rng) {
  const auto d = static_cast<std::size_t>(config.dim);
  if (mode == ProjectorMode::Both) {
    for (int l = 0; l < levels; ++l) {
      Linear g;
      g.weight = store.add_uniform("hap.gate" + std::to_string(l + 1) + ".weight", {d, 2}, d, rng);
      g.bias = store.add_constant("hap.gate" + std::to_string(l + 1) + ".bias", {2}, 0.0);
      gates_.push_back(std::move(g));
    }
  }
}

Tensor HierarchicalAdaptiveProjector::gate_probs(const Tensor& h, int level) const {
  const Linear& g = gates_.at(static_cast<std::size_t>(level));
  Tensor pooled = reshape(mean_pool(h), {1, h.cols()});
  return softmax_rows(g(pooled));
}

GateDecision HierarchicalAdaptiveProjector::gate(const Tensor& h, int level) const {
  GateDecision decision;
  decision.layer = level + 1;
  if (mode_ != ProjectorMode::Both) {
    decision.gated = false;
    decision.selected = mode_ == ProjectorMode::MambaOnly ? 1 : 0;
    decision.probs = {decision.selected == 0 ? 1.0 : 0.0, decision.selected == 1 ? 1.0 : 0.0};
    return decision;
  }
  NoGradScope no_grad;
  Tensor p = gate_probs(h, level);
  decision.probs = {p[0], p[1]};
  decision.selected = argmax_tie_low(p[0], p[1]);
  return decision;
}

Tensor HierarchicalAdaptiveProjector::run(ProjectorKind kind, const Tensor& h, const SequenceLayout& layout,
                                          ForwardTrace& trace) const {
  if (kind == ProjectorKind::Attention) {
    ++trace.attention_calls;
    return attention_(h);
  }
  ++trace.mamba_calls;
  return mamba_(h, layout);
}

ProjectedTokens HierarchicalAdaptiveProjector::select_and_project(const Tensor& h, int level,
                                                                  const SequenceLayout& layout, TokenSource source,
                                                                  ForwardTrace& trace) const {
  ProjectedTokens out;
  out.source = source;
  GateDecision decision;
  decision.layer = level + 1;
  if (mode_ != ProjectorMode::Both) {
    decision = gate(h, level);
    out.projector = static_cast<ProjectorKind>(decision.selected);
    out.tokens = run(out.projector, h, layout, trace);
    trace.gates.push_back(decision);
    return out;
  }

  ++trace.hap_gate_calls;
  Tensor p = gate_probs(h, level);
  const int k = StopGradientReplay::filter_choice({argmax_tie_low(p[0], p[1])}).front();
  decision.probs = {p[0], p[1]};
  decision.selected = k;
  trace.gates.push_back(decision);

  out.projector = static_cast<ProjectorKind>(k);
  Tensor tokens = run(out.projector, h, layout, trace);
  Tensor pk = pick(p, {0}, {k});
  Tensor factor = add_scalar(sub(pk, detach(pk)), 1.0);
  out.tokens = mul(tokens, factor);
  return out;
}

std::vector<ProjectedTokens> HierarchicalAdaptiveProjector::project_all(const HierarchicalFeatures& hf,
                                                                        const Molecule& mol, ForwardTrace& trace,
                                                                        bool route_motifs) const {
  std::vector<ProjectedTokens> blocks;
  const int levels = static_cast<int>(hf.layers.size());
  if (mode_ == ProjectorMode::Both && static_cast<int>(gates_.size()) < levels + 1) {
    throw Error(ErrorCode::ShapeMismatch, "more hierarchy levels than gates");
  }
  for (int l = 0; l < levels; ++l) {
    blocks.push_back(select_and_project(hf.layers[static_cast<std::size_t>(l)], l, mol.node_layout,
                                        mode_ == ProjectorMode::MambaOnly ? TokenSource::Mamba : TokenSource::Attention,
                                        trace));
    blocks.back().source = blocks.back().projector == ProjectorKind::Mamba ? TokenSource::Mamba : TokenSource::Attention;
  }
  if (route_motifs) {
    blocks.push_back(select_and_project(hf.motifs, levels, mol.motif_layout, TokenSource::Motif, trace));
  } else {
    ProjectedTokens motif;
    motif.source = TokenSource::Motif;
    motif.projector = ProjectorKind::Attention;
    motif.tokens = run(ProjectorKind::Attention, hf.motifs, mol.motif_layout, trace);
    blocks.push_back(std::move(motif));
  }
  return blocks;
}

}  // namespace hsa
