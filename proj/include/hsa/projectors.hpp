#pragma once

#include <vector>

#include "hsa/dataset.hpp"
#include "hsa/ops.hpp"
#include "hsa/params.hpp"
#include "hsa/tensor.hpp"
#include "hsa/trace.hpp"

namespace hsa {

struct ProjectorConfig {
  int dim = 64;
  int tokens = 8;       // K
  int heads = 4;
  int state = 8;        // s, per channel
  double alpha = 0.5;   // structural-bias strength, ≥ 0
};

enum class TokenSource { Attention, Mamba, Motif };

/// K×d token block from one hierarchy level.
struct ProjectedTokens {
  Tensor tokens;
  TokenSource source = TokenSource::Attention;
  ProjectorKind projector = ProjectorKind::Attention;
};

/// Learnable-query multi-head cross-attention over node rows:
/// tokens = LN(Q + Wo·concat_h softmax(q_h k_hᵀ/√d_h) v_h).
class CrossAttentionProjector {
 public:
  CrossAttentionProjector(const ProjectorConfig& config, ParameterStore& store, Rng& rng);

  struct Output {
    Tensor tokens;
    std::vector<Tensor> weights;  // per head, K×n
    Tensor attended;              // concat of per-head weights·V, before the output map
  };
  Output attend(const Tensor& h, const RowMask& mask = {}) const;
  Tensor operator()(const Tensor& h, const RowMask& mask = {}) const { return attend(h, mask).tokens; }

  const Tensor& queries() const { return queries_; }
  const Tensor& value_weight() const { return wv_.weight; }

 private:
  ProjectorConfig config_;
  Tensor queries_;
  Linear wq_, wk_, wv_, wo_;
  LayerNormParams norm_;
};

struct SsmParams {
  Linear delta;   // d → d (Δ before softplus)
  Linear in_b;    // d → s
  Linear in_c;    // d → s
  Tensor a_log;   // d×s, A = exp(a_log) > 0
  Tensor skip;    // d
  double alpha = 0.5;
};

/// Decay multipliers γ: γ_0 = 1, γ_t = 1 + α·(gap_{t−1} − 1).
std::vector<double> gap_factors(const std::vector<int>& gaps, double alpha);

/// Contiguous pooling segments of n rows into K tokens: near-equal lengths with
/// the earlier segments one longer on remainder; when n < K each row is its own
/// segment and the last one repeats.
std::vector<std::vector<int>> pooling_segments(std::size_t n, std::size_t k);

/// Structure-aware state-space projector over a serialised node sequence.
class MambaProjector {
 public:
  MambaProjector(const ProjectorConfig& config, ParameterStore& store, Rng& rng);

  /// Graph-aware selective scan over an already ordered sequence x[n×d]
  /// with n−1 hop gaps between consecutive rows.
  Tensor scan(const Tensor& x_seq, const std::vector<int>& hop_gaps) const;
  /// Reorder, scan, segment-pool to K rows, layernorm.
  Tensor operator()(const Tensor& h, const SequenceLayout& layout) const;

  const SsmParams& params() const { return ssm_; }
  SsmParams& mutable_params() { return ssm_; }

 private:
  ProjectorConfig config_;
  SsmParams ssm_;
  LayerNormParams norm_;
};

}  // namespace hsa
