#include "hsa/generator.hpp"

#include <array>

#include "hsa/error.hpp"
#include "hsa/tasks.hpp"

namespace hsa {

namespace {

struct RingTemplate {
  const char* smiles;
  int atoms;
  bool aromatic;
};

constexpr std::array<RingTemplate, 7> kRings = {{
    {"c1ccccc1", 6, true},
    {"C1CCCCC1", 6, false},
    {"c1ccncc1", 6, true},
    {"C1CCCC1", 5, false},
    {"c1ccsc1", 5, true},
    {"c1ccoc1", 5, true},
    {"c1ccc2ccccc2c1", 10, true},
}};

// Chain pieces that leave the last atom free for one more bond.
struct Piece {
  const char* smiles;
  int atoms;
  bool branchable;  // last atom is an sp3 carbon with spare valence
};

constexpr std::array<Piece, 6> kPieces = {{
    {"C", 1, true},
    {"CC", 2, true},
    {"C(=O)", 2, false},
    {"C(O)", 2, false},
    {"C(N)", 2, false},
    {"C=C", 2, false},
}};

constexpr std::array<const char*, 3> kHetero = {"O", "N", "S"};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

class Builder {
 public:
  Builder(Rng& rng, int atoms) : rng_(rng), remaining_(atoms) {}

  std::string build() {
    while (remaining_ > 0) {
      const int roll = uniform_int(rng_, 0, 9);
      if (roll < 3 && try_ring()) continue;
      if (roll < 5 && try_piece()) continue;
      add_chain_atom();
      if (remaining_ >= 3 && last_branchable_ && chance(rng_, 0.25)) add_branch();
    }
    return out_;
  }

 private:
  void joint(bool aromatic_next) {
    // An explicit single bond keeps aromatic neighbours from fusing into one ring system.
    if (last_aromatic_ && aromatic_next) out_ += '-';
  }

  bool try_ring() {
    const auto& r = kRings[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(kRings.size()) - 1))];
    if (r.atoms > remaining_) return false;
    joint(r.aromatic);
    out_ += r.smiles;
    remaining_ -= r.atoms;
    last_aromatic_ = r.aromatic;
    last_branchable_ = false;
    last_hetero_ = false;
    return true;
  }

  bool try_piece() {
    if (out_.empty()) return false;
    const auto& p = kPieces[static_cast<std::size_t>(uniform_int(rng_, 0, static_cast<int>(kPieces.size()) - 1))];
    if (p.atoms > remaining_) return false;
    out_ += p.smiles;
    remaining_ -= p.atoms;
    last_aromatic_ = false;
    last_branchable_ = p.branchable;
    last_hetero_ = false;
    return true;
  }

  void add_chain_atom() {
    if (!out_.empty() && !last_hetero_ && remaining_ > 1 && chance(rng_, 0.15)) {
      out_ += kHetero[static_cast<std::size_t>(uniform_int(rng_, 0, 2))];
      last_hetero_ = true;
      last_branchable_ = false;
    } else {
      out_ += 'C';
      last_hetero_ = false;
      last_branchable_ = true;
    }
    last_aromatic_ = false;
    --remaining_;
  }

  void add_branch() {
    const int len = uniform_int(rng_, 1, std::min(3, remaining_ - 1));
    out_ += '(';
    for (int i = 0; i < len; ++i) {
      if (i == len - 1 && len > 1 && chance(rng_, 0.3)) out_ += 'O';
      else out_ += 'C';
    }
    out_ += ')';
    remaining_ -= len;
  }

  Rng& rng_;
  int remaining_;
  std::string out_;
  bool last_aromatic_ = false;
  bool last_branchable_ = false;
  bool last_hetero_ = false;
};

}  // namespace

std::string generate_smiles(Rng& rng, int atoms) {
  if (atoms < 1) throw Error(ErrorCode::InvalidConfig, "molecule needs at least one atom");
  return Builder(rng, atoms).build();
}

Dataset generate_dataset(const GeneratorOptions& options) {
  if (options.min_atoms < 1 || options.max_atoms < options.min_atoms) {
    throw Error(ErrorCode::InvalidConfig, "invalid atom range");
  }
  Rng rng(options.seed);
  Dataset data;
  data.target_names.assign(kTargetNames.begin(), kTargetNames.end());
  data.molecules.reserve(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    const int atoms = uniform_int(rng, options.min_atoms, options.max_atoms);
    std::string smiles = generate_smiles(rng, atoms);
    Molecule mol = prepare_molecule(smiles);
    mol.targets = synth_targets(mol.graph);
    data.molecules.push_back(std::move(mol));
  }
  return data;
}

}  // namespace hsa
