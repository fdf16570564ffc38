#include "hsa/saf.hpp"

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

std::array<int, 2> top2(std::span<const double> gate) {
  if (gate.size() < 2) throw Error(ErrorCode::ShapeMismatch, "top-2 routing needs at least two experts");
  int first = 0;
  for (std::size_t i = 1; i < gate.size(); ++i) {
    if (gate[i] > gate[static_cast<std::size_t>(first)]) first = static_cast<int>(i);
  }
  int second = first == 0 ? 1 : 0;
  for (std::size_t i = 0; i < gate.size(); ++i) {
    if (static_cast<int>(i) == first) continue;
    if (gate[i] > gate[static_cast<std::size_t>(second)]) second = static_cast<int>(i);
  }
  return {first, second};
}

Tensor flatten_blocks(const std::vector<ProjectedTokens>& blocks) {
  if (blocks.empty()) throw Error(ErrorCode::EmptyInput, "no token blocks to fuse");
  if (blocks.size() == 1) return blocks.front().tokens;
  std::vector<Tensor> parts;
  parts.reserve(blocks.size());
  for (const auto& b : blocks) parts.push_back(b.tokens);
  return concat_rows(parts);
}

ExpertBank::ExpertBank(int dim, int experts, int hidden, ParameterStore& store, Rng& rng) {
  if (experts < 2) throw Error(ErrorCode::InvalidConfig, "expert bank needs N >= 2");
  const auto d = static_cast<std::size_t>(dim);
  gate_ = Linear::create(store, "saf.gate", d, static_cast<std::size_t>(experts), rng, false);
  for (int i = 0; i < experts; ++i) {
    experts_.push_back(FeedForward::create(store, "saf.expert" + std::to_string(i), d,
                                           static_cast<std::size_t>(hidden), d, rng));
  }
}

RoutingDecision ExpertBank::route(std::span<const double> z) const {
  NoGradScope no_grad;
  Tensor row({1, z.size()}, std::vector<double>(z.begin(), z.end()));
  Tensor p = softmax_rows(gate_(row));
  RoutingDecision r;
  r.gate.assign(p.values().begin(), p.values().end());
  r.selected = top2(r.gate);
  return r;
}

Tensor ExpertBank::fuse(const std::vector<ProjectedTokens>& blocks, FusionMode mode, ForwardTrace& trace) const {
  return fuse(flatten_blocks(blocks), mode, trace);
}

Tensor ExpertBank::fuse(const Tensor& tokens, FusionMode mode, ForwardTrace& trace) const {
  const std::size_t m = tokens.rows();
  const std::size_t n = experts_.size();
  if (m == 0) throw Error(ErrorCode::EmptyInput, "no tokens to fuse");
  Tensor probs = softmax_rows(gate_(tokens));
  trace.saf_gate_tokens += m;

  std::vector<int> flat(2 * m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto sel = top2(probs.values().subspan(j * n, n));
    flat[2 * j] = sel[0];
    flat[2 * j + 1] = sel[1];
  }
  flat = StopGradientReplay::filter_choice(std::move(flat));

  std::vector<std::vector<int>> rows_of(n);
  for (std::size_t j = 0; j < m; ++j) {
    RoutingDecision r;
    r.gate.assign(probs.values().begin() + static_cast<long>(j * n), probs.values().begin() + static_cast<long>((j + 1) * n));
    r.selected = {flat[2 * j], flat[2 * j + 1]};
    trace.routes.push_back(std::move(r));
    rows_of[static_cast<std::size_t>(flat[2 * j])].push_back(static_cast<int>(j));
    rows_of[static_cast<std::size_t>(flat[2 * j + 1])].push_back(static_cast<int>(j));
  }
  if (trace.expert_tokens.size() < n) trace.expert_tokens.resize(n, 0);

  Tensor pair_total;
  if (mode == FusionMode::Weighted) {
    std::vector<int> all(m), first(m), second(m);
    for (std::size_t j = 0; j < m; ++j) {
      all[j] = static_cast<int>(j);
      first[j] = flat[2 * j];
      second[j] = flat[2 * j + 1];
    }
    pair_total = add(pick(probs, all, first), pick(probs, all, second));
  }

  Tensor out;
  bool have_out = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rows = rows_of[i];
    if (rows.empty()) continue;
    trace.expert_tokens[i] += rows.size();
    Tensor y = experts_[i](gather_rows(tokens, rows));
    Tensor p = pick(probs, rows, std::vector<int>(rows.size(), static_cast<int>(i)));
    Tensor factor;
    if (mode == FusionMode::Verbatim) {
      factor = add_scalar(sub(p, detach(p)), 1.0);
    } else {
      factor = div(p, pick(reshape(pair_total, {m, 1}), rows, std::vector<int>(rows.size(), 0)));
    }
    Tensor part = scatter_add_rows(scale_rows(y, factor), rows, m);
    out = have_out ? add(out, part) : part;
    have_out = true;
  }
  return out;
}

SharedFusion::SharedFusion(int dim, int hidden, ParameterStore& store, Rng& rng)
    : mlp_(FeedForward::create(store, "fusion.shared", static_cast<std::size_t>(dim),
                               static_cast<std::size_t>(hidden), static_cast<std::size_t>(dim), rng)) {}

Tensor SharedFusion::fuse(const std::vector<ProjectedTokens>& blocks, ForwardTrace& trace) const {
  Tensor tokens = flatten_blocks(blocks);
  trace.shared_mlp_tokens += tokens.rows();
  return mlp_(tokens);
}

}  // namespace hsa
