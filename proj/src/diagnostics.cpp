#include "hsa/diagnostics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hsa/error.hpp"
#include "hsa/kernels.hpp"
#include "hsa/ops.hpp"

namespace hsa {

double mean_pairwise_cosine(const Tensor& h) {
  if (h.rows() < 2) throw Error(ErrorCode::ShapeMismatch, "pairwise cosine needs at least two rows");
  return kernels::mean_pairwise_cosine(h.values(), h.rows(), h.cols());
}

std::vector<double> oversmoothing_curve(const GraphEncoder& encoder, const Dataset& data) {
  const auto layers = static_cast<std::size_t>(encoder.config().layers);
  std::vector<double> total(layers, 0.0);
  std::size_t used = 0;
  NoGradScope no_grad;
  for (const auto& mol : data.molecules) {
    if (mol.num_atoms() < 2) continue;
    const auto h = encoder.encode_layers(mol.graph);
    for (std::size_t l = 0; l < layers; ++l) total[l] += mean_pairwise_cosine(h[l]);
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::EmptyDataset, "no molecule with two or more atoms");
  for (auto& t : total) t /= static_cast<double>(used);
  return total;
}

double dispersion(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw Error(ErrorCode::EmptyDataset, "dispersion of no points");
  const std::size_t d = points.front().size();
  std::vector<std::vector<double>> unit;
  for (const auto& p : points) {
    double norm = 0.0;
    for (double v : p) norm += v * v;
    norm = std::sqrt(norm);
    std::vector<double> u(d, 0.0);
    if (norm > 0.0)
      for (std::size_t c = 0; c < d; ++c) u[c] = p[c] / norm;
    unit.push_back(std::move(u));
  }
  std::vector<double> centroid(d, 0.0);
  for (const auto& u : unit)
    for (std::size_t c = 0; c < d; ++c) centroid[c] += u[c] / static_cast<double>(unit.size());
  double total = 0.0;
  for (const auto& u : unit) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += (u[c] - centroid[c]) * (u[c] - centroid[c]);
    total += std::sqrt(acc);
  }
  return total / static_cast<double>(unit.size());
}

double dispersion_trend(const HsaModel& model, const Dataset& data, int layer, ProjectorKind projector) {
  if (data.size() < 2) throw Error(ErrorCode::EmptyDataset, "dispersion needs at least two molecules");
  const int levels = model.config().layers + 1;
  if (layer < 1 || layer > levels) throw Error(ErrorCode::InvalidConfig, "layer out of range");
  NoGradScope no_grad;
  std::vector<std::vector<double>> points;
  for (const auto& mol : data.molecules) {
    const auto hf = model.encoder().encode(mol, model.vocabulary());
    const bool motif = layer == levels;
    const Tensor& h = motif ? hf.motifs : hf.layers[static_cast<std::size_t>(layer - 1)];
    const SequenceLayout& layout = motif ? mol.motif_layout : mol.node_layout;
    Tensor tokens = projector == ProjectorKind::Attention ? model.hap().attention()(h) : model.hap().mamba()(h, layout);
    Tensor v = mean_pool(tokens);
    points.emplace_back(v.values().begin(), v.values().end());
  }
  return dispersion(points);
}

// --- PCA ------------------------------------------------------------------------

namespace {
using Matrix = std::vector<std::vector<double>>;

std::vector<double> mat_vec(const Matrix& c, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += c[i][j] * v[j];
  return out;
}

double norm2(const std::vector<double>& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

void orthogonalize(std::vector<double>& v, const std::vector<double>& against) {
  const double dot = std::inner_product(v.begin(), v.end(), against.begin(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * against[i];
}

void fix_sign(std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0)
    for (auto& x : v) x = -x;
}

/// Dominant eigenvector of a symmetric PSD matrix; falls back to `start` projected
/// off `against` when the matrix annihilates everything.
std::vector<double> power_iteration(const Matrix& c, std::vector<double> v, const std::vector<double>* against) {
  if (against) orthogonalize(v, *against);
  double n = norm2(v);
  for (auto& x : v) x /= n;
  for (int it = 0; it < 1000; ++it) {
    auto next = mat_vec(c, v);
    if (against) orthogonalize(next, *against);
    n = norm2(next);
    if (n < 1e-300) break;
    for (auto& x : next) x /= n;
    double change = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) change = std::max(change, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (change < 1e-9) break;
  }
  return v;
}
}  // namespace

PcaResult pca_embed(const std::vector<std::vector<double>>& features, std::uint64_t seed) {
  const std::size_t m = features.size();
  if (m < 2) throw Error(ErrorCode::EmptyDataset, "PCA needs at least two points");
  const std::size_t d = features.front().size();
  for (const auto& f : features) {
    if (f.size() != d) throw Error(ErrorCode::ShapeMismatch, "ragged feature rows");
  }
  std::vector<double> mu(d, 0.0);
  for (const auto& f : features)
    for (std::size_t c = 0; c < d; ++c) mu[c] += f[c] / static_cast<double>(m);
  Matrix centered(m, std::vector<double>(d));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < d; ++c) centered[i][c] = features[i][c] - mu[c];
  Matrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& row : centered)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov[a][b] += row[a] * row[b] / static_cast<double>(m);

  PcaResult result;
  result.coords.assign(m, {0.0, 0.0});
  result.components.assign(d, {0.0, 0.0});
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov[a][a];
  if (trace <= 0.0 || d < 2) {
    result.degenerate = true;
    return result;
  }

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> start1(d), start2(d);
  for (auto& x : start1) x = normal(rng);
  for (auto& x : start2) x = normal(rng);

  auto v1 = power_iteration(cov, start1, nullptr);
  fix_sign(v1);
  const double l1 = std::inner_product(v1.begin(), v1.end(), mat_vec(cov, v1).begin(), 0.0);
  Matrix deflated = cov;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) deflated[a][b] -= l1 * v1[a] * v1[b];
  auto v2 = power_iteration(deflated, start2, &v1);
  orthogonalize(v2, v1);
  const double n2 = norm2(v2);
  for (auto& x : v2) x /= n2;
  fix_sign(v2);
  const double l2 = std::inner_product(v2.begin(), v2.end(), mat_vec(cov, v2).begin(), 0.0);

  result.variances = {l1, l2};
  for (std::size_t c = 0; c < d; ++c) result.components[c] = {v1[c], v2[c]};
  for (std::size_t i = 0; i < m; ++i) {
    result.coords[i] = {std::inner_product(centered[i].begin(), centered[i].end(), v1.begin(), 0.0),
                        std::inner_product(centered[i].begin(), centered[i].end(), v2.begin(), 0.0)};
  }
  return result;
}

double cluster_separation(const std::vector<std::vector<double>>& features, const std::vector<int>& labels) {
  if (features.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "one label per feature row");
  if (features.empty()) throw Error(ErrorCode::EmptyDataset, "separation of no points");
  const std::size_t d = features.front().size();
  std::map<int, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
  if (classes.size() < 2) throw Error(ErrorCode::InvalidConfig, "separation needs two classes");

  std::vector<std::vector<double>> centroids;
  double spread = 0.0;
  for (const auto& [label, members] : classes) {
    std::vector<double> c(d, 0.0);
    for (auto i : members)
      for (std::size_t k = 0; k < d; ++k) c[k] += features[i][k] / static_cast<double>(members.size());
    double s = 0.0;
    for (auto i : members) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += (features[i][k] - c[k]) * (features[i][k] - c[k]);
      s += std::sqrt(acc);
    }
    spread += s / static_cast<double>(members.size()) / static_cast<double>(classes.size());
    centroids.push_back(std::move(c));
  }
  double between = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < centroids.size(); ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += (centroids[a][k] - centroids[b][k]) * (centroids[a][k] - centroids[b][k]);
      between += std::sqrt(acc);
      ++pairs;
    }
  }
  between /= static_cast<double>(pairs);
  return spread > 0.0 ? between / spread : std::numeric_limits<double>::infinity();
}

std::vector<std::vector<double>> molecule_features(const HsaModel& model, const Dataset& data) {
  NoGradScope no_grad;
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (const auto& mol : data.molecules) {
    const auto r = model.forward(mol);
    out.emplace_back(r.pooled.values().begin(), r.pooled.values().end());
  }
  return out;
}

// --- size strata --------------------------------------------------------------------

StratifiedReport size_stratified_eval(const HsaModel& model, const Dataset& data, const TargetScaler& scaler,
                                      int bin_width) {
  if (bin_width < 1) throw Error(ErrorCode::InvalidConfig, "bin width must be >= 1");
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to stratify");
  const auto eval = evaluate(model, data, scaler);
  const bool regression = model.config().task == TaskKind::Regression;
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0;
    std::size_t items = 0;
  };
  std::map<int, Acc> bins;
  StratifiedReport report;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& mol = data.molecules[i];
    const int atoms = static_cast<int>(mol.num_atoms());
    ++report.histogram[atoms];
    Acc& acc = bins[atoms / bin_width];
    ++acc.n;
    for (std::size_t k = 0; k < mol.targets.size(); ++k) {
      const double p = eval.predictions[i][k];
      acc.sum += regression ? std::abs(p - mol.targets[k]) : ((p > 0.5) == (mol.targets[k] >= 0.5) ? 1.0 : 0.0);
      ++acc.items;
    }
  }
  for (const auto& [bin, acc] : bins) {
    report.rows.push_back({bin * bin_width, (bin + 1) * bin_width, acc.n, acc.sum / static_cast<double>(acc.items)});
  }
  return report;
}

std::vector<double> gating_ratio_report(const HsaModel& model, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "gating report needs molecules");
  const auto levels = static_cast<std::size_t>(model.config().layers + 1);
  std::vector<double> ratio(levels, 0.0);
  NoGradScope no_grad;
  for (const auto& mol : data.molecules) {
    const auto r = model.forward(mol);
    for (const auto& g : r.trace.gates) {
      if (g.selected == 1) ratio[static_cast<std::size_t>(g.layer - 1)] += 1.0;
    }
  }
  for (auto& v : ratio) v /= static_cast<double>(data.size());
  return ratio;
}

std::vector<std::size_t> expert_load_histogram(const HsaModel& model, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "expert histogram needs molecules");
  std::vector<std::size_t> counts(model.experts() ? static_cast<std::size_t>(model.experts()->size()) : 0, 0);
  NoGradScope no_grad;
  for (const auto& mol : data.molecules) {
    const auto r = model.forward(mol);
    for (const auto& route : r.trace.routes) {
      ++counts[static_cast<std::size_t>(route.selected[0])];
      ++counts[static_cast<std::size_t>(route.selected[1])];
    }
  }
  return counts;
}

// --- ablation ------------------------------------------------------------------------

void validate_variant(const AblationVariant& v) {
  if (!v.attention && !v.mamba) {
    throw Error(ErrorCode::InvalidToggleCombination, "variant " + v.name + " disables both projectors");
  }
}

ModelConfig apply_variant(ModelConfig base, const AblationVariant& v) {
  validate_variant(v);
  base.projectors = v.attention && v.mamba ? ProjectorMode::Both
                    : v.attention          ? ProjectorMode::AttentionOnly
                                           : ProjectorMode::MambaOnly;
  base.saf = v.saf;
  return base;
}

std::vector<AblationVariant> standard_ablation() {
  return {
      {"attention_only_mlp", true, false, false}, {"attention_only_saf", true, false, true},
      {"mamba_only_mlp", false, true, false},     {"mamba_only_saf", false, true, true},
      {"both_mlp", true, true, false},            {"both_saf", true, true, true},
  };
}

std::vector<AblationRow> run_ablation(const ExperimentSpec& spec, const Dataset& train_set, const Dataset& val_set) {
  for (const auto& v : spec.variants) validate_variant(v);
  std::vector<AblationRow> rows;
  for (const auto& v : spec.variants) {
    HsaModel model(apply_variant(spec.model, v), graphs_of(train_set));
    const auto result = train(model, train_set, val_set, spec.train);
    AblationRow row;
    row.variant = v.name;
    row.metric = result.best_metric;
    row.best_epoch = result.best_epoch;
    NoGradScope no_grad;
    const Dataset& probe = val_set.empty() ? train_set : val_set;
    for (const auto& mol : probe.molecules) {
      const auto r = model.forward(mol);
      row.hap_gate_calls += r.trace.hap_gate_calls;
      row.saf_gate_tokens += r.trace.saf_gate_tokens;
    }
    rows.push_back(row);
  }
  return rows;
}

// --- CSV ---------------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string oversmoothing_csv(const std::vector<double>& curve) {
  std::string out = "layer,cos_sim\n";
  for (std::size_t l = 0; l < curve.size(); ++l) out += std::to_string(l + 1) + "," + format_number(curve[l]) + "\n";
  return out;
}

std::string gating_csv(const std::vector<double>& ratios) {
  std::string out = "layer,mamba_ratio\n";
  for (std::size_t l = 0; l < ratios.size(); ++l) out += std::to_string(l + 1) + "," + format_number(ratios[l]) + "\n";
  return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,metric,best_epoch,hap_gate_calls,saf_gate_tokens\n";
  for (const auto& r : rows) {
    out += r.variant + "," + format_number(r.metric) + "," + std::to_string(r.best_epoch) + "," +
           std::to_string(r.hap_gate_calls) + "," + std::to_string(r.saf_gate_tokens) + "\n";
  }
  return out;
}

std::string strata_csv(const StratifiedReport& report) {
  std::string out = "bin_lo,bin_hi,n,metric\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.bin_lo) + "," + std::to_string(r.bin_hi) + "," + std::to_string(r.count) + "," +
           format_number(r.metric) + "\n";
  }
  return out;
}

std::string embed_csv(const PcaResult& pca, const std::vector<int>& labels) {
  if (labels.size() != pca.coords.size()) throw Error(ErrorCode::ShapeMismatch, "one label per embedded point");
  std::string out = "id,x,y,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i) + "," + format_number(pca.coords[i][0]) + "," + format_number(pca.coords[i][1]) + "," +
           std::to_string(labels[i]) + "\n";
  }
  return out;
}

std::string experts_csv(const std::vector<std::size_t>& counts) {
  std::string out = "expert_id,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) out += std::to_string(i) + "," + std::to_string(counts[i]) + "\n";
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace hsa
