#include "hsa/molgraph.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "hsa/error.hpp"

namespace hsa {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnbalancedParenthesis: return "UnbalancedParenthesis";
    case ErrorCode::UnmatchedRingBond: return "UnmatchedRingBond";
    case ErrorCode::UnknownAtomSymbol: return "UnknownAtomSymbol";
    case ErrorCode::DisconnectedInput: return "DisconnectedInput";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NaNInput: return "NaNInput";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::DetachedFromTape: return "DetachedFromTape";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TargetWidthMismatch: return "TargetWidthMismatch";
    case ErrorCode::InvalidToggleCombination: return "InvalidToggleCombination";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string AtomRecord::written() const {
  if (!aromatic) return symbol;
  std::string s = symbol;
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

bool AtomRecord::is_heteroatom() const {
  return symbol == "N" || symbol == "O" || symbol == "S" || symbol == "P";
}

MolGraph::MolGraph(std::vector<AtomRecord> atoms, std::vector<Bond> bonds)
    : atoms_(std::move(atoms)), bonds_(std::move(bonds)) {
  build_index();
}

void MolGraph::build_index() {
  const auto n = atoms_.size();
  neighbors_.assign(n, {});
  for (const auto& b : bonds_) {
    neighbors_[b.a].push_back(b.b);
    neighbors_[b.b].push_back(b.a);
  }
  for (std::size_t v = 0; v < n; ++v) {
    atoms_[v].degree = static_cast<int>(neighbors_[v].size());
  }

  // Bridge finding: a bond is a ring bond iff it is not a bridge.
  ring_bonds_.assign(bonds_.size(), false);
  ring_atoms_.assign(n, false);
  std::vector<std::vector<std::pair<int, int>>> inc(n);  // (neighbor, bond index)
  for (std::size_t e = 0; e < bonds_.size(); ++e) {
    inc[bonds_[e].a].emplace_back(bonds_[e].b, static_cast<int>(e));
    inc[bonds_[e].b].emplace_back(bonds_[e].a, static_cast<int>(e));
  }
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(bonds_.size(), false);
  int timer = 0;
  std::function<void(int, int)> dfs = [&](int v, int parent_edge) {
    disc[v] = low[v] = timer++;
    for (auto [u, e] : inc[v]) {
      if (e == parent_edge) continue;
      if (disc[u] < 0) {
        dfs(u, e);
        low[v] = std::min(low[v], low[u]);
        if (low[u] > disc[v]) bridge[e] = true;
      } else {
        low[v] = std::min(low[v], disc[u]);
      }
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (disc[v] < 0) dfs(static_cast<int>(v), -1);
  }
  for (std::size_t e = 0; e < bonds_.size(); ++e) {
    if (!bridge[e]) {
      ring_bonds_[e] = true;
      ring_atoms_[bonds_[e].a] = true;
      ring_atoms_[bonds_[e].b] = true;
    }
  }
}

std::optional<int> MolGraph::bond_between(int u, int v) const {
  for (std::size_t e = 0; e < bonds_.size(); ++e) {
    const auto& b = bonds_[e];
    if ((b.a == u && b.b == v) || (b.a == v && b.b == u)) return static_cast<int>(e);
  }
  return std::nullopt;
}

MolGraph MolGraph::permuted(const std::vector<int>& perm) const {
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
  std::vector<AtomRecord> atoms;
  atoms.reserve(perm.size());
  for (int old : perm) atoms.push_back(atoms_[old]);
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const auto& b : bonds_) bonds.push_back({inverse[b.a], inverse[b.b], b.order});
  return MolGraph(std::move(atoms), std::move(bonds));
}

// ---------------------------------------------------------------------------
// SMILES subset reader

namespace {

struct PendingRing {
  int atom = -1;
  std::optional<BondOrder> order;
  std::size_t offset = 0;
};

class SmilesReader {
 public:
  explicit SmilesReader(std::string_view text) : text_(text) {}

  MolGraph read() {
    if (text_.empty()) throw Error(ErrorCode::EmptyInput, "empty SMILES string");
    while (pos_ < text_.size()) step();
    if (pending_bond_) {
      throw ParseError(ErrorCode::UnknownAtomSymbol, pending_bond_offset_, "dangling bond symbol");
    }
    if (!branches_.empty()) {
      throw ParseError(ErrorCode::UnbalancedParenthesis, branches_.back().second,
                       "unclosed branch");
    }
    for (const auto& ring : rings_) {
      if (ring.atom >= 0) {
        throw ParseError(ErrorCode::UnmatchedRingBond, ring.offset, "ring bond never closed");
      }
    }
    if (atoms_.empty()) throw ParseError(ErrorCode::UnknownAtomSymbol, 0, "no atoms");
    return MolGraph(std::move(atoms_), std::move(bonds_));
  }

 private:
  void step() {
    const char ch = text_[pos_];
    const std::size_t at = pos_;
    switch (ch) {
      case '-': set_bond(BondOrder::Single, at); ++pos_; return;
      case '=': set_bond(BondOrder::Double, at); ++pos_; return;
      case '#': set_bond(BondOrder::Triple, at); ++pos_; return;
      case '(':
        if (current_ < 0 || pending_bond_) {
          throw ParseError(ErrorCode::UnbalancedParenthesis, at, "branch without a preceding atom");
        }
        branches_.emplace_back(current_, at);
        branch_open_ = true;
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) {
          throw ParseError(ErrorCode::UnbalancedParenthesis, at, "unmatched ')'");
        }
        if (pending_bond_ || branch_open_) {
          throw ParseError(ErrorCode::UnbalancedParenthesis, at, "empty or unterminated branch");
        }
        current_ = branches_.back().first;
        branches_.pop_back();
        ++pos_;
        return;
      case '.':
        throw ParseError(ErrorCode::DisconnectedInput, at, "multi-component input");
      default:
        break;
    }
    if (ch >= '1' && ch <= '9') {
      ring_digit(ch - '0', at);
      ++pos_;
      return;
    }
    read_atom(at);
  }

  void set_bond(BondOrder order, std::size_t at) {
    if (pending_bond_ || current_ < 0) {
      throw ParseError(ErrorCode::UnknownAtomSymbol, at, "misplaced bond symbol");
    }
    pending_bond_ = order;
    pending_bond_offset_ = at;
  }

  void read_atom(std::size_t at) {
    const char ch = text_[pos_];
    const char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    AtomRecord atom;
    std::size_t width = 1;
    if (ch == 'C' && next == 'l') {
      atom.symbol = "Cl";
      width = 2;
    } else if (ch == 'B' && next == 'r') {
      atom.symbol = "Br";
      width = 2;
    } else {
      switch (ch) {
        case 'B': case 'C': case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
          atom.symbol = std::string(1, ch);
          break;
        case 'c': case 'n': case 'o': case 's':
          atom.symbol = std::string(1, static_cast<char>(std::toupper(ch)));
          atom.aromatic = true;
          break;
        default:
          throw ParseError(ErrorCode::UnknownAtomSymbol, at,
                           std::string("unsupported symbol '") + ch + "'");
      }
    }
    const int index = static_cast<int>(atoms_.size());
    atoms_.push_back(atom);
    if (current_ >= 0) add_bond(current_, index, pending_bond_, at);
    pending_bond_.reset();
    current_ = index;
    branch_open_ = false;
    pos_ += width;
  }

  void ring_digit(int digit, std::size_t at) {
    if (current_ < 0) throw ParseError(ErrorCode::UnmatchedRingBond, at, "ring bond without atom");
    auto& ring = rings_[digit];
    if (ring.atom < 0) {
      ring = PendingRing{current_, pending_bond_, at};
    } else {
      if (ring.atom == current_) {
        throw ParseError(ErrorCode::UnmatchedRingBond, at, "ring bond closes on itself");
      }
      if (ring.order && pending_bond_ && *ring.order != *pending_bond_) {
        throw ParseError(ErrorCode::UnmatchedRingBond, at, "conflicting ring bond orders");
      }
      auto order = pending_bond_ ? pending_bond_ : ring.order;
      add_bond(ring.atom, current_, order, at);
      ring = PendingRing{};
    }
    pending_bond_.reset();
  }

  void add_bond(int a, int b, std::optional<BondOrder> explicit_order, std::size_t at) {
    for (const auto& existing : bonds_) {
      if ((existing.a == a && existing.b == b) || (existing.a == b && existing.b == a)) {
        throw ParseError(ErrorCode::UnmatchedRingBond, at, "duplicate bond");
      }
    }
    BondOrder order = BondOrder::Single;
    if (explicit_order) {
      order = *explicit_order;
    } else if (atoms_[a].aromatic && atoms_[b].aromatic) {
      order = BondOrder::Aromatic;
    }
    bonds_.push_back({a, b, order});
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int current_ = -1;
  bool branch_open_ = false;
  std::optional<BondOrder> pending_bond_;
  std::size_t pending_bond_offset_ = 0;
  std::vector<std::pair<int, std::size_t>> branches_;
  PendingRing rings_[10];
  std::vector<AtomRecord> atoms_;
  std::vector<Bond> bonds_;
};

}  // namespace

MolGraph parse_smiles(std::string_view text) { return SmilesReader(text).read(); }

// ---------------------------------------------------------------------------

StructMatrices struct_matrices(const MolGraph& g) {
  StructMatrices m;
  const auto n = g.num_atoms();
  m.n = n;
  m.adjacency.assign(n * n, 0);
  m.distance.assign(n * n, -1);
  for (const auto& b : g.bonds()) {
    m.adjacency[b.a * n + b.b] = 1;
    m.adjacency[b.b * n + b.a] = 1;
  }
  std::vector<int> queue;
  queue.reserve(n);
  for (std::size_t src = 0; src < n; ++src) {
    int* row = m.distance.data() + src * n;
    row[src] = 0;
    queue.clear();
    queue.push_back(static_cast<int>(src));
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const int v = queue[head];
      for (int u : g.neighbors(v)) {
        if (row[u] < 0) {
          row[u] = row[v] + 1;
          queue.push_back(u);
        }
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fragmentation

bool is_cleavable(const MolGraph& g, int bond_index) {
  const auto& b = g.bonds()[bond_index];
  if (b.order != BondOrder::Single || g.ring_bonds()[bond_index]) return false;
  const auto& ring = g.ring_atoms();
  if (ring[b.a] != ring[b.b]) return true;
  const auto& x = g.atoms()[b.a];
  const auto& y = g.atoms()[b.b];
  return (x.is_heteroatom() && y.is_carbon()) || (y.is_heteroatom() && x.is_carbon());
}

MotifSet fragment_motifs(const MolGraph& g) {
  const int n = static_cast<int>(g.num_atoms());
  std::vector<std::vector<int>> kept(n);
  for (std::size_t e = 0; e < g.num_bonds(); ++e) {
    if (is_cleavable(g, static_cast<int>(e))) continue;
    const auto& b = g.bonds()[e];
    kept[b.a].push_back(b.b);
    kept[b.b].push_back(b.a);
  }

  MotifSet m;
  m.fragment_of.assign(n, -1);
  for (int start = 0; start < n; ++start) {
    if (m.fragment_of[start] >= 0) continue;
    const int id = static_cast<int>(m.fragments.size());
    std::vector<int> members{start};
    m.fragment_of[start] = id;
    for (std::size_t head = 0; head < members.size(); ++head) {
      for (int u : kept[members[head]]) {
        if (m.fragment_of[u] < 0) {
          m.fragment_of[u] = id;
          members.push_back(u);
        }
      }
    }
    std::sort(members.begin(), members.end());
    m.fragments.push_back(std::move(members));
  }

  for (std::size_t f = 0; f < m.fragments.size(); ++f) {
    const auto& members = m.fragments[f];
    std::vector<std::string> elements;
    std::vector<int> degrees;
    bool ring = false;
    for (int v : members) {
      elements.push_back(g.atoms()[v].written());
      int deg = 0;
      for (int u : kept[v]) deg += (m.fragment_of[u] == static_cast<int>(f)) ? 1 : 0;
      degrees.push_back(deg);
      ring = ring || g.ring_atoms()[v];
    }
    std::sort(elements.begin(), elements.end());
    std::sort(degrees.begin(), degrees.end());
    std::ostringstream key;
    for (std::size_t i = 0; i < elements.size(); ++i) key << (i ? "," : "") << elements[i];
    key << '|' << (ring ? 'R' : 'A') << '|';
    for (std::size_t i = 0; i < degrees.size(); ++i) key << (i ? "," : "") << degrees[i];
    m.keys.push_back(key.str());
  }
  return m;
}

// ---------------------------------------------------------------------------

MotifVocabulary::MotifVocabulary(int min_freq) : min_freq_(min_freq) {
  keys_.push_back(kUnkKey);
  freq_.push_back(0);
  ids_.emplace(kUnkKey, kUnk);
}

void MotifVocabulary::add(const std::string& key) {
  auto it = ids_.find(key);
  if (it == ids_.end()) {
    const int id = static_cast<int>(keys_.size());
    ids_.emplace(key, id);
    keys_.push_back(key);
    freq_.push_back(1);
  } else {
    ++freq_[it->second];
  }
}

int MotifVocabulary::lookup(const std::string& key) const {
  auto it = ids_.find(key);
  if (it == ids_.end() || it->second == kUnk) return kUnk;
  return freq_[it->second] >= min_freq_ ? it->second : kUnk;
}

int MotifVocabulary::frequency(const std::string& key) const {
  auto it = ids_.find(key);
  return it == ids_.end() ? 0 : freq_[it->second];
}

std::string MotifVocabulary::serialize() const {
  std::ostringstream out;
  out << "min_freq\t" << min_freq_ << '\n';
  for (std::size_t i = 1; i < keys_.size(); ++i) out << keys_[i] << '\t' << freq_[i] << '\n';
  return out.str();
}

MotifVocabulary MotifVocabulary::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("min_freq\t", 0) != 0) {
    throw Error(ErrorCode::Io, "malformed vocabulary header");
  }
  MotifVocabulary vocab(std::stoi(line.substr(9)));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::Io, "malformed vocabulary line");
    const std::string key = line.substr(0, tab);
    vocab.ids_.emplace(key, static_cast<int>(vocab.keys_.size()));
    vocab.keys_.push_back(key);
    vocab.freq_.push_back(std::stoi(line.substr(tab + 1)));
  }
  return vocab;
}

MotifVocabulary build_motif_vocabulary(const std::vector<MolGraph>& corpus, int min_freq) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "motif vocabulary needs molecules");
  MotifVocabulary vocab(min_freq);
  for (const auto& g : corpus) {
    for (const auto& key : fragment_motifs(g).keys) vocab.add(key);
  }
  return vocab;
}

// ---------------------------------------------------------------------------

std::vector<int> fragment_order(const MotifSet& m) {
  std::vector<int> order(m.fragments.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& fa = m.fragments[a];
    const auto& fb = m.fragments[b];
    if (fa.size() != fb.size()) return fa.size() > fb.size();
    return fa.front() < fb.front();
  });
  return order;
}

std::vector<int> serialize_nodes(const MolGraph& g, const MotifSet& m) {
  std::vector<int> out;
  out.reserve(g.num_atoms());
  for (int f : fragment_order(m)) {
    std::vector<int> members = m.fragments[f];
    std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
      const int da = g.atoms()[a].degree;
      const int db = g.atoms()[b].degree;
      if (da != db) return da > db;
      return a < b;
    });
    out.insert(out.end(), members.begin(), members.end());
  }
  return out;
}

}  // namespace hsa
