#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsa/dataset.hpp"
#include "hsa/encoder.hpp"
#include "hsa/error.hpp"
#include "hsa/generator.hpp"
#include "hsa/ops.hpp"

namespace hsa {
namespace {

struct Fixture {
  explicit Fixture(EncoderConfig cfg = {}, std::size_t vocab = 4) : rng(cfg.seed), encoder(cfg, vocab, store, rng) {}
  ParameterStore store;
  Rng rng;
  GraphEncoder encoder;
};

EncoderConfig small_config(Aggregation agg = Aggregation::Sum) {
  EncoderConfig cfg;
  cfg.layers = 3;
  cfg.dim = 8;
  cfg.aggregation = agg;
  cfg.seed = 4;
  return cfg;
}

void expect_rows_equal(const Tensor& t, double tol) {
  for (std::size_t r = 1; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) EXPECT_NEAR(t.at(r, c), t.at(0, c), tol);
}

TEST(InitFeatures, SumsThreeEmbeddings) {
  Fixture f(small_config());
  Tensor h = f.encoder.init_node_features(parse_smiles("C"));
  ASSERT_EQ(h.shape(), (Shape{1, 8}));
  const int carbon = element_index("C");
  for (std::size_t c = 0; c < 8; ++c) {
    const double expect = f.encoder.element_table().at(carbon, c) + f.encoder.aromatic_table().at(0, c) +
                          f.encoder.degree_table().at(0, c);
    EXPECT_EQ(h.at(0, c), expect);
  }
}

TEST(InitFeatures, EquivalentAtomsShareRows) {
  Fixture f(small_config());
  expect_rows_equal(f.encoder.init_node_features(parse_smiles("c1ccccc1")), 0.0);
  Tensor ethane_like = f.encoder.init_node_features(parse_smiles("OCCO"));
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(ethane_like.at(0, c), ethane_like.at(3, c));
    EXPECT_EQ(ethane_like.at(1, c), ethane_like.at(2, c));
  }
}

TEST(Encode, SingleAtomUsesSelfTermOnly) {
  Fixture f(small_config());
  MolGraph g = parse_smiles("C");
  auto layers = f.encoder.encode_layers(g);
  ASSERT_EQ(layers.size(), 3u);
  Tensor h = f.encoder.init_node_features(g);
  for (const auto& layer : f.encoder.layers()) {
    h = layer.norm(layer.out(silu(layer.hidden(mul(h, add_scalar(layer.eps, 1.0))))));
  }
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(layers.back().at(0, c), h.at(0, c));
}

TEST(Encode, BenzeneRowsIdenticalInEveryLayer) {
  Fixture f(small_config());
  for (const auto& h : f.encoder.encode_layers(parse_smiles("c1ccccc1"))) expect_rows_equal(h, 1e-12);
}

TEST(Encode, PermutationEquivariance) {
  for (auto agg : {Aggregation::Sum, Aggregation::Mean}) {
    Fixture f(small_config(agg));
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      MolGraph g = parse_smiles(generate_smiles(rng, 20));
      std::vector<int> perm(g.num_atoms());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      auto base = f.encoder.encode_layers(g);
      auto moved = f.encoder.encode_layers(g.permuted(perm));
      for (std::size_t l = 0; l < base.size(); ++l)
        for (std::size_t i = 0; i < perm.size(); ++i)
          for (std::size_t c = 0; c < 8; ++c)
            ASSERT_NEAR(moved[l].at(i, c), base[l].at(static_cast<std::size_t>(perm[i]), c), 1e-12);
    }
  }
}

TEST(Motifs, RowCountsAndUnkFallback) {
  Fixture f(small_config());
  std::vector<MolGraph> corpus = {parse_smiles("Cc1ccccc1")};
  auto vocab = build_motif_vocabulary(corpus, 1);
  auto toluene = prepare_molecule("Cc1ccccc1");
  auto hf = f.encoder.encode(toluene, vocab);
  EXPECT_EQ(hf.motifs.shape(), (Shape{2, 8}));
  EXPECT_EQ(f.encoder.encode(prepare_molecule("C"), vocab).motifs.rows(), 1u);

  // A fragment whose key is unknown uses row 0 of the motif table.
  auto pyridine = prepare_molecule("c1ccncc1");
  ASSERT_EQ(vocab.lookup(pyridine.motifs.keys[0]), MotifVocabulary::kUnk);
  Tensor last = f.encoder.encode_layers(pyridine.graph).back();
  Tensor got = f.encoder.encode_motifs(pyridine.motifs, vocab, last);
  Tensor expect = f.encoder.encode_motifs(pyridine.motifs, MotifVocabulary(1), last);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(got.at(0, c), expect.at(0, c));
}

TEST(Encode, UnknownElementThrows) { EXPECT_THROW(element_index("Xe"), Error); }

}  // namespace
}  // namespace hsa
