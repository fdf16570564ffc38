#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hsa/molgraph.hpp"

namespace hsa {

/// Node sequence fed to the state-space projector: a row order plus the graph
/// hop distance between consecutive entries (order.size() − 1 gaps).
struct SequenceLayout {
  std::vector<int> order;
  std::vector<int> gaps;
};

/// A parsed molecule with every structure derived once up front.
struct Molecule {
  std::string smiles;
  MolGraph graph;
  StructMatrices matrices;
  MotifSet motifs;
  SequenceLayout node_layout;
  SequenceLayout motif_layout;
  std::vector<double> targets;

  std::size_t num_atoms() const { return graph.num_atoms(); }
};

std::vector<int> hop_gaps(const StructMatrices& m, const std::vector<int>& order);

/// Fragments in serialisation order; gap = shortest hop distance between any
/// atom pair of consecutive fragments.
SequenceLayout motif_sequence(const MolGraph& g, const MotifSet& m, const StructMatrices& s);

Molecule prepare_molecule(std::string smiles, std::vector<double> targets = {});

struct Dataset {
  std::vector<std::string> target_names;  // from a "# smiles<TAB>name…" header when present
  std::vector<Molecule> molecules;

  std::size_t size() const { return molecules.size(); }
  bool empty() const { return molecules.empty(); }
  std::size_t target_width() const;
  int target_index(const std::string& name) const;  // -1 when absent
};

/// One record per line: SMILES[<TAB>target…]; lines starting with '#' are comments.
Dataset parse_dataset(const std::string& text);
Dataset read_dataset(const std::filesystem::path& path);
std::string format_dataset(const Dataset& data);

/// Deterministic split: shuffles indices with `seed`, first ⌊train_fraction·n⌋ go to training.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed);

std::vector<MolGraph> graphs_of(const Dataset& data);

}  // namespace hsa
