#include "hsa/model.hpp"

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

HsaModel::HsaModel(const ModelConfig& config, const std::vector<MolGraph>& corpus)
    : config_(config), vocab_(build_motif_vocabulary(corpus, config.motif_min_freq)) {
  build();
}

HsaModel::HsaModel(const ModelConfig& config, MotifVocabulary vocab) : config_(config), vocab_(std::move(vocab)) {
  build();
}

void HsaModel::build() {
  const auto& c = config_;
  if (c.outputs < 1) throw Error(ErrorCode::InvalidConfig, "head needs at least one output");
  if (c.tokens < 1) throw Error(ErrorCode::InvalidConfig, "tokens must be >= 1");
  Rng rng(c.seed);

  EncoderConfig ec;
  ec.layers = c.layers;
  ec.dim = c.dim;
  ec.learnable_eps = c.learnable_eps;
  ec.aggregation = c.aggregation;
  ec.seed = c.seed;
  encoder_ = std::make_unique<GraphEncoder>(ec, vocab_.size(), store_, rng);

  ProjectorConfig pc;
  pc.dim = c.dim;
  pc.tokens = c.tokens;
  pc.heads = c.heads;
  pc.state = c.state;
  pc.alpha = c.alpha;
  hap_ = std::make_unique<HierarchicalAdaptiveProjector>(pc, c.layers + 1, c.projectors, store_, rng);

  const int hidden = c.ff_mult * c.dim;
  if (c.saf) {
    experts_ = std::make_unique<ExpertBank>(c.dim, c.experts, hidden, store_, rng);
  } else {
    shared_ = std::make_unique<SharedFusion>(c.dim, hidden, store_, rng);
  }
  head_ = Linear::create(store_, "head", static_cast<std::size_t>(c.dim), static_cast<std::size_t>(c.outputs), rng);
}

ForwardResult HsaModel::forward(const Molecule& mol) const {
  ForwardResult r;
  r.features = encoder_->encode(mol, vocab_);
  r.blocks = hap_->project_all(r.features, mol, r.trace, config_.route_motifs);
  r.fused = experts_ ? experts_->fuse(r.blocks, config_.fusion, r.trace) : shared_->fuse(r.blocks, r.trace);
  r.pooled = mean_pool(r.fused);
  r.output = reshape(head_(reshape(r.pooled, {1, r.pooled.numel()})), {static_cast<std::size_t>(config_.outputs)});
  return r;
}

}  // namespace hsa
