#pragma once

#include <array>
#include <span>
#include <vector>

#include "hsa/params.hpp"
#include "hsa/projectors.hpp"
#include "hsa/trace.hpp"

namespace hsa {

enum class FusionMode { Verbatim, Weighted };

/// Indices of the two largest entries, ties to the lower index.
std::array<int, 2> top2(std::span<const double> gate);

/// N independent feed-forward experts d → d_ff → d with a bias-free linear gate W_s.
class ExpertBank {
 public:
  ExpertBank(int dim, int experts, int hidden, ParameterStore& store, Rng& rng);

  int size() const { return static_cast<int>(experts_.size()); }
  RoutingDecision route(std::span<const double> z) const;

  /// Flattens the blocks to M tokens and sums the outputs of each token's two selected experts.
  /// Verbatim: each term carries a unit-forward straight-through factor on its gate probability.
  /// Weighted: terms are weighted by the renormalised gate probabilities of the pair.
  Tensor fuse(const std::vector<ProjectedTokens>& blocks, FusionMode mode, ForwardTrace& trace) const;
  Tensor fuse(const Tensor& tokens, FusionMode mode, ForwardTrace& trace) const;

  const Linear& gate() const { return gate_; }
  const FeedForward& expert(int i) const { return experts_.at(static_cast<std::size_t>(i)); }

 private:
  Linear gate_;
  std::vector<FeedForward> experts_;
};

/// Single shared feed-forward map used when source-aware fusion is disabled.
class SharedFusion {
 public:
  SharedFusion(int dim, int hidden, ParameterStore& store, Rng& rng);
  Tensor fuse(const std::vector<ProjectedTokens>& blocks, ForwardTrace& trace) const;

 private:
  FeedForward mlp_;
};

Tensor flatten_blocks(const std::vector<ProjectedTokens>& blocks);

}  // namespace hsa
