#include "hsa/projectors.hpp"

#include <cmath>

#include "hsa/error.hpp"

namespace hsa {

CrossAttentionProjector::CrossAttentionProjector(const ProjectorConfig& config, ParameterStore& store, Rng& rng)
    : config_(config) {
  if (config.heads < 1 || config.dim % config.heads != 0) {
    throw Error(ErrorCode::InvalidConfig, "dim must be divisible by the head count");
  }
  const auto d = static_cast<std::size_t>(config.dim);
  queries_ = store.add_uniform("attn.queries", {static_cast<std::size_t>(config.tokens), d}, 1, rng);
  wq_ = Linear::create(store, "attn.wq", d, d, rng, false);
  wk_ = Linear::create(store, "attn.wk", d, d, rng, false);
  wv_ = Linear::create(store, "attn.wv", d, d, rng, false);
  wo_ = Linear::create(store, "attn.wo", d, d, rng);
  norm_ = LayerNormParams::create(store, "attn.norm", d);
}

CrossAttentionProjector::Output CrossAttentionProjector::attend(const Tensor& h, const RowMask& mask) const {
  if (h.rows() == 0) throw Error(ErrorCode::EmptyMask, "cross-attention over zero nodes");
  const auto heads = static_cast<std::size_t>(config_.heads);
  const std::size_t dh = static_cast<std::size_t>(config_.dim) / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor q = wq_(queries_);
  Tensor k = wk_(h);
  Tensor v = wv_(h);
  Output out;
  std::vector<Tensor> per_head;
  for (std::size_t i = 0; i < heads; ++i) {
    Tensor qh = slice_cols(q, i * dh, dh);
    Tensor kh = slice_cols(k, i * dh, dh);
    Tensor vh = slice_cols(v, i * dh, dh);
    Tensor w = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt), mask);
    per_head.push_back(matmul(w, vh));
    out.weights.push_back(w);
  }
  out.attended = heads == 1 ? per_head.front() : concat_cols(per_head);
  out.tokens = norm_(add(queries_, wo_(out.attended)));
  return out;
}

std::vector<double> gap_factors(const std::vector<int>& gaps, double alpha) {
  std::vector<double> gamma(gaps.size() + 1, 1.0);
  for (std::size_t t = 1; t < gamma.size(); ++t) {
    gamma[t] = 1.0 + alpha * (static_cast<double>(gaps[t - 1]) - 1.0);
  }
  return gamma;
}

std::vector<std::vector<int>> pooling_segments(std::size_t n, std::size_t k) {
  std::vector<std::vector<int>> segments;
  if (n == 0 || k == 0) return segments;
  if (n < k) {
    for (std::size_t i = 0; i < n; ++i) segments.push_back({static_cast<int>(i)});
    while (segments.size() < k) segments.push_back(segments.back());
    return segments;
  }
  const std::size_t base = n / k, rem = n % k;
  int next = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t len = base + (s < rem ? 1 : 0);
    std::vector<int> seg;
    for (std::size_t i = 0; i < len; ++i) seg.push_back(next++);
    segments.push_back(std::move(seg));
  }
  return segments;
}

MambaProjector::MambaProjector(const ProjectorConfig& config, ParameterStore& store, Rng& rng) : config_(config) {
  if (config.alpha < 0.0) throw Error(ErrorCode::InvalidConfig, "alpha must be non-negative");
  const auto d = static_cast<std::size_t>(config.dim);
  const auto s = static_cast<std::size_t>(config.state);
  ssm_.delta = Linear::create(store, "mamba.delta", d, d, rng);
  ssm_.in_b = Linear::create(store, "mamba.in_b", d, s, rng, false);
  ssm_.in_c = Linear::create(store, "mamba.in_c", d, s, rng, false);
  // Decay rates spread geometrically over [0.01, 1] so the state holds both
  // long and short memories.
  std::vector<double> a_log(d * s);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t j = 0; j < s; ++j) {
      const double frac = s > 1 ? static_cast<double>(j) / static_cast<double>(s - 1) : 0.0;
      a_log[c * s + j] = std::log(0.01) * (1.0 - frac);
    }
  }
  ssm_.a_log = store.add_values("mamba.a_log", {d, s}, std::move(a_log));
  ssm_.skip = store.add_constant("mamba.skip", {d}, 1.0);
  ssm_.alpha = config.alpha;
  norm_ = LayerNormParams::create(store, "mamba.norm", d);
}

Tensor MambaProjector::scan(const Tensor& x_seq, const std::vector<int>& hop_gaps) const {
  if (hop_gaps.size() + 1 != x_seq.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "need n-1 hop gaps for a sequence of n rows");
  }
  Tensor delta = softplus(ssm_.delta(x_seq));
  Tensor b = ssm_.in_b(x_seq);
  Tensor c = ssm_.in_c(x_seq);
  return selective_scan(x_seq, delta, b, c, exp(ssm_.a_log), ssm_.skip, gap_factors(hop_gaps, ssm_.alpha));
}

Tensor MambaProjector::operator()(const Tensor& h, const SequenceLayout& layout) const {
  Tensor seq = gather_rows(h, layout.order);
  Tensor y = scan(seq, layout.gaps);
  return norm_(segment_mean(y, pooling_segments(y.rows(), static_cast<std::size_t>(config_.tokens))));
}

}  // namespace hsa
