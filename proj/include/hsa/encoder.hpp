#pragma once

#include <cstdint>
#include <vector>

#include "hsa/dataset.hpp"
#include "hsa/molgraph.hpp"
#include "hsa/params.hpp"
#include "hsa/tensor.hpp"

namespace hsa {

enum class Aggregation { Sum, Mean };

struct EncoderConfig {
  int layers = 6;
  int dim = 64;
  bool learnable_eps = true;
  Aggregation aggregation = Aggregation::Sum;
  std::uint64_t seed = 0;
};

struct HierarchicalFeatures {
  std::vector<Tensor> layers;  // H^(1..L), each |V|×d
  Tensor motifs;               // #fragments×d
};

/// Index of an element symbol in the embedding table.
int element_index(const std::string& symbol);
inline constexpr int kElementCount = 10;
inline constexpr int kDegreeBuckets = 6;  // degrees 0..4, then ≥5

/// GIN-style message passing encoder plus the motif feature encoder.
///   h_v ← LN(W2·SiLU(W1·((1+ε_l)·h_v + AGG_{u∈N(v)} h_u) + b1) + b2)
class GraphEncoder {
 public:
  GraphEncoder(const EncoderConfig& config, std::size_t motif_vocab_size, ParameterStore& store, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  Tensor init_node_features(const MolGraph& g) const;
  /// H^(1)…H^(L).
  std::vector<Tensor> encode_layers(const MolGraph& g) const;
  /// Per fragment: embed(vocab id) + Linear(mean of final-layer rows), then layernorm.
  Tensor encode_motifs(const MotifSet& m, const MotifVocabulary& vocab, const Tensor& final_layer) const;
  HierarchicalFeatures encode(const Molecule& mol, const MotifVocabulary& vocab) const;

  struct Layer {
    Tensor eps;  // scalar
    Linear hidden;
    Linear out;
    LayerNormParams norm;
  };
  const std::vector<Layer>& layers() const { return layers_; }
  const Tensor& element_table() const { return element_embed_; }
  const Tensor& aromatic_table() const { return aromatic_embed_; }
  const Tensor& degree_table() const { return degree_embed_; }
  const Tensor& motif_table() const { return motif_embed_; }

 private:
  EncoderConfig config_;
  Tensor element_embed_;
  Tensor aromatic_embed_;
  Tensor degree_embed_;
  std::vector<Layer> layers_;
  Tensor motif_embed_;
  Linear motif_proj_;
  LayerNormParams motif_norm_;
};

}  // namespace hsa
