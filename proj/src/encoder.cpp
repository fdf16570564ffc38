#include "hsa/encoder.hpp"

#include <algorithm>

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

int element_index(const std::string& symbol) {
  static const char* const kSymbols[kElementCount] = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
  for (int i = 0; i < kElementCount; ++i) {
    if (symbol == kSymbols[i]) return i;
  }
  throw Error(ErrorCode::UnknownAtomSymbol, "no embedding for element " + symbol);
}

GraphEncoder::GraphEncoder(const EncoderConfig& config, std::size_t motif_vocab_size, ParameterStore& store,
                           Rng& rng)
    : config_(config) {
  if (config.layers < 1 || config.dim < 2) {
    throw Error(ErrorCode::InvalidConfig, "encoder needs layers >= 1 and dim >= 2");
  }
  const auto d = static_cast<std::size_t>(config.dim);
  // Embedding tables have fan-in 1.
  element_embed_ = store.add_uniform("encoder.embed.element", {kElementCount, d}, 1, rng);
  aromatic_embed_ = store.add_uniform("encoder.embed.aromatic", {2, d}, 1, rng);
  degree_embed_ = store.add_uniform("encoder.embed.degree", {kDegreeBuckets, d}, 1, rng);
  for (int l = 0; l < config.layers; ++l) {
    const std::string name = "encoder.layer" + std::to_string(l + 1);
    Layer layer;
    if (config.learnable_eps) {
      layer.eps = store.add_constant(name + ".eps", {}, 0.0);
    } else {
      layer.eps = Tensor::scalar(0.0);
    }
    layer.hidden = Linear::create(store, name + ".mlp1", d, d, rng);
    layer.out = Linear::create(store, name + ".mlp2", d, d, rng);
    layer.norm = LayerNormParams::create(store, name + ".norm", d);
    layers_.push_back(std::move(layer));
  }
  motif_embed_ = store.add_uniform("encoder.motif.embed", {std::max<std::size_t>(motif_vocab_size, 1), d}, 1, rng);
  motif_proj_ = Linear::create(store, "encoder.motif.proj", d, d, rng);
  motif_norm_ = LayerNormParams::create(store, "encoder.motif.norm", d);
}

Tensor GraphEncoder::init_node_features(const MolGraph& g) const {
  std::vector<int> elements, aromatic, degree;
  for (const auto& atom : g.atoms()) {
    elements.push_back(element_index(atom.symbol));
    aromatic.push_back(atom.aromatic ? 1 : 0);
    degree.push_back(std::min(atom.degree, kDegreeBuckets - 1));
  }
  return add(add(embedding_lookup(element_embed_, elements), embedding_lookup(aromatic_embed_, aromatic)),
             embedding_lookup(degree_embed_, degree));
}

std::vector<Tensor> GraphEncoder::encode_layers(const MolGraph& g) const {
  std::vector<Tensor> out;
  out.reserve(layers_.size());
  Tensor h = init_node_features(g);
  const bool mean_agg = config_.aggregation == Aggregation::Mean;
  for (const auto& layer : layers_) {
    Tensor self = mul(h, add_scalar(layer.eps, 1.0));
    Tensor combined = add(self, aggregate_neighbors(h, g.adjacency_lists(), mean_agg));
    h = layer.norm(layer.out(silu(layer.hidden(combined))));
    out.push_back(h);
  }
  return out;
}

Tensor GraphEncoder::encode_motifs(const MotifSet& m, const MotifVocabulary& vocab, const Tensor& final_layer) const {
  std::vector<int> ids;
  ids.reserve(m.keys.size());
  for (const auto& key : m.keys) {
    const int id = vocab.lookup(key);
    ids.push_back(static_cast<std::size_t>(id) < motif_embed_.rows() ? id : MotifVocabulary::kUnk);
  }
  Tensor pooled = segment_mean(final_layer, m.fragments);
  return motif_norm_(add(embedding_lookup(motif_embed_, ids), motif_proj_(pooled)));
}

HierarchicalFeatures GraphEncoder::encode(const Molecule& mol, const MotifVocabulary& vocab) const {
  HierarchicalFeatures hf;
  hf.layers = encode_layers(mol.graph);
  hf.motifs = encode_motifs(mol.motifs, vocab, hf.layers.back());
  return hf;
}

}  // namespace hsa
