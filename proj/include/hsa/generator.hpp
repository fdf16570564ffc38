#pragma once

#include <cstdint>
#include <string>

#include "hsa/dataset.hpp"
#include "hsa/params.hpp"

namespace hsa {

struct GeneratorOptions {
  std::size_t count = 100;
  std::uint64_t seed = 7;
  int min_atoms = 1;
  int max_atoms = 40;
};

/// One SMILES string with exactly `atoms` heavy atoms, assembled from chain,
/// branch, ring and hetero-substitution templates.
std::string generate_smiles(Rng& rng, int atoms);

/// `count` molecules with sizes drawn uniformly from [min_atoms, max_atoms]
/// and every synthetic target attached.
Dataset generate_dataset(const GeneratorOptions& options);

}  // namespace hsa
