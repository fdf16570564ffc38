#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace hsa {

enum class ProjectorKind : int { Attention = 0, Mamba = 1 };

/// Gate outcome for one hierarchy level (layer 1..L, or L+1 for motifs).
struct GateDecision {
  int layer = 0;
  std::array<double, 2> probs{0.5, 0.5};
  int selected = 0;  // 0 attention, 1 mamba
  bool gated = true; // false when a variant forces the projector
};

/// SAF routing for one token.
struct RoutingDecision {
  std::vector<double> gate;
  std::array<int, 2> selected{0, 1};
};

/// Per-call record of routing decisions and evaluation counters.
struct ForwardTrace {
  std::vector<GateDecision> gates;
  std::vector<RoutingDecision> routes;
  std::size_t attention_calls = 0;
  std::size_t mamba_calls = 0;
  std::size_t hap_gate_calls = 0;
  std::size_t saf_gate_tokens = 0;
  std::vector<std::size_t> expert_tokens;  // tokens evaluated by each expert
  std::size_t shared_mlp_tokens = 0;
};

}  // namespace hsa
