#include "hsa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "hsa/error.hpp"

namespace hsa {

std::vector<int> hop_gaps(const StructMatrices& m, const std::vector<int>& order) {
  std::vector<int> gaps;
  for (std::size_t t = 1; t < order.size(); ++t) {
    gaps.push_back(m.dist(static_cast<std::size_t>(order[t - 1]), static_cast<std::size_t>(order[t])));
  }
  return gaps;
}

SequenceLayout motif_sequence(const MolGraph&, const MotifSet& m, const StructMatrices& s) {
  SequenceLayout layout;
  layout.order = fragment_order(m);
  for (std::size_t t = 1; t < layout.order.size(); ++t) {
    const auto& fa = m.fragments[layout.order[t - 1]];
    const auto& fb = m.fragments[layout.order[t]];
    int best = std::numeric_limits<int>::max();
    for (int u : fa)
      for (int v : fb) best = std::min(best, s.dist(static_cast<std::size_t>(u), static_cast<std::size_t>(v)));
    layout.gaps.push_back(best);
  }
  return layout;
}

Molecule prepare_molecule(std::string smiles, std::vector<double> targets) {
  Molecule mol;
  mol.graph = parse_smiles(smiles);
  mol.smiles = std::move(smiles);
  mol.matrices = struct_matrices(mol.graph);
  mol.motifs = fragment_motifs(mol.graph);
  mol.node_layout.order = serialize_nodes(mol.graph, mol.motifs);
  mol.node_layout.gaps = hop_gaps(mol.matrices, mol.node_layout.order);
  mol.motif_layout = motif_sequence(mol.graph, mol.motifs, mol.matrices);
  mol.targets = std::move(targets);
  return mol;
}

std::size_t Dataset::target_width() const {
  return molecules.empty() ? target_names.size() : molecules.front().targets.size();
}

int Dataset::target_index(const std::string& name) const {
  for (std::size_t i = 0; i < target_names.size(); ++i) {
    if (target_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {
std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && s[i] == ' ') ++i;
  return s.substr(i);
}
}  // namespace

Dataset parse_dataset(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto fields = split_tabs(line.substr(1));
      if (data.target_names.empty() && fields.size() > 1 && trim(fields[0]) == "smiles") {
        for (std::size_t i = 1; i < fields.size(); ++i) data.target_names.push_back(trim(fields[i]));
      }
      continue;
    }
    auto fields = split_tabs(line);
    std::vector<double> targets;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        targets.push_back(std::stod(trim(fields[i])));
      } catch (const std::exception&) {
        throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": bad target '" + fields[i] + "'");
      }
    }
    if (!data.molecules.empty() && targets.size() != data.molecules.front().targets.size()) {
      throw Error(ErrorCode::TargetWidthMismatch, "line " + std::to_string(line_no) + " has " +
                                                      std::to_string(targets.size()) + " targets");
    }
    data.molecules.push_back(prepare_molecule(trim(fields[0]), std::move(targets)));
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw Error(ErrorCode::Io, "cannot read dataset " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_dataset(buf.str());
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream out;
  if (!data.target_names.empty()) {
    out << "# smiles";
    for (const auto& name : data.target_names) out << '\t' << name;
    out << '\n';
  }
  out << std::setprecision(17);
  for (const auto& mol : data.molecules) {
    out << mol.smiles;
    for (double t : mol.targets) out << '\t' << t;
    out << '\n';
  }
  return out.str();
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(data.size()));
  Dataset train, held_out;
  train.target_names = held_out.target_names = data.target_names;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < cut ? train : held_out).molecules.push_back(data.molecules[idx[i]]);
  }
  return {std::move(train), std::move(held_out)};
}

std::vector<MolGraph> graphs_of(const Dataset& data) {
  std::vector<MolGraph> out;
  out.reserve(data.size());
  for (const auto& m : data.molecules) out.push_back(m.graph);
  return out;
}

}  // namespace hsa
