#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsa {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct AtomRecord {
  std::string symbol;  // canonical capitalised element, e.g. "C", "Cl"
  bool aromatic = false;
  int degree = 0;

  /// Element as written in SMILES: lowercase for aromatic atoms.
  std::string written() const;
  bool is_carbon() const { return symbol == "C"; }
  bool is_heteroatom() const;  // N, O, S, P
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

class MolGraph {
 public:
  MolGraph() = default;
  MolGraph(std::vector<AtomRecord> atoms, std::vector<Bond> bonds);

  std::size_t num_atoms() const { return atoms_.size(); }
  std::size_t num_bonds() const { return bonds_.size(); }
  const std::vector<AtomRecord>& atoms() const { return atoms_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const std::vector<int>& neighbors(int v) const { return neighbors_[v]; }
  const std::vector<std::vector<int>>& adjacency_lists() const { return neighbors_; }

  /// Bond index joining u and v, if any.
  std::optional<int> bond_between(int u, int v) const;

  /// True for atoms lying on at least one cycle.
  const std::vector<bool>& ring_atoms() const { return ring_atoms_; }
  /// True for bonds lying on at least one cycle (non-bridges).
  const std::vector<bool>& ring_bonds() const { return ring_bonds_; }

  /// Relabel atoms: atom i of the result is atom perm[i] of this graph.
  MolGraph permuted(const std::vector<int>& perm) const;

 private:
  void build_index();

  std::vector<AtomRecord> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<bool> ring_atoms_;
  std::vector<bool> ring_bonds_;
};

/// Parse the supported SMILES subset (organic subset atoms, aromatic c/n/o/s,
/// bonds - = #, branches and single-digit ring closures). Throws ParseError.
MolGraph parse_smiles(std::string_view text);

struct StructMatrices {
  std::size_t n = 0;
  std::vector<std::uint8_t> adjacency;  // n*n row-major
  std::vector<int> distance;            // n*n hop counts

  int adj(std::size_t i, std::size_t j) const { return adjacency[i * n + j]; }
  int dist(std::size_t i, std::size_t j) const { return distance[i * n + j]; }
};

StructMatrices struct_matrices(const MolGraph& g);

struct MotifSet {
  std::vector<std::vector<int>> fragments;  // each sorted ascending; ordered by min index
  std::vector<std::string> keys;            // one canonical key per fragment
  std::vector<int> fragment_of;             // atom -> fragment index
};

/// True if the bond is cut by the fragmentation rules.
bool is_cleavable(const MolGraph& g, int bond_index);

MotifSet fragment_motifs(const MolGraph& g);

class MotifVocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr const char* kUnkKey = "<unk>";

  explicit MotifVocabulary(int min_freq = 1);

  /// Add one occurrence of a key, assigning the next dense id on first sight.
  void add(const std::string& key);
  /// Id for the key, or kUnk when unknown or below the frequency threshold.
  int lookup(const std::string& key) const;
  int frequency(const std::string& key) const;

  std::size_t size() const { return keys_.size(); }
  int min_freq() const { return min_freq_; }
  const std::vector<std::string>& keys() const { return keys_; }
  const std::vector<int>& frequencies() const { return freq_; }

  std::string serialize() const;
  static MotifVocabulary deserialize(const std::string& text);

 private:
  int min_freq_;
  std::vector<std::string> keys_;
  std::vector<int> freq_;
  std::map<std::string, int> ids_;
};

MotifVocabulary build_motif_vocabulary(const std::vector<MolGraph>& corpus, int min_freq);

/// Node order for the sequence projector: fragments by size descending (ties by
/// smaller minimum index), then atoms within a fragment by degree descending
/// (ties by index).
std::vector<int> serialize_nodes(const MolGraph& g, const MotifSet& m);

/// Fragment order implied by serialize_nodes.
std::vector<int> fragment_order(const MotifSet& m);

}  // namespace hsa
