#include "hsa/config.hpp"

#include <fstream>
#include <sstream>

#include "hsa/diagnostics.hpp"
#include "hsa/error.hpp"

namespace hsa {

namespace {
std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long out = std::stoll(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, key + " expects an integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, key + " expects a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw Error(ErrorCode::InvalidConfig, key + " expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = strip(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const char* projector_name(ProjectorMode m) {
  switch (m) {
    case ProjectorMode::Both: return "both";
    case ProjectorMode::AttentionOnly: return "attention";
    case ProjectorMode::MambaOnly: return "mamba";
  }
  return "both";
}

const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::Regression: return "regression";
    case TaskKind::Classification: return "classification";
    case TaskKind::Multilabel: return "multilabel";
  }
  return "regression";
}
}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = strip(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(number) + " is not key=value");
    }
    out[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return out;
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  model.seed = s;
  train.seed = s;
  generator.seed = s;
}

RunConfig apply_config(RunConfig c, const std::map<std::string, std::string>& values) {
  if (auto it = values.find("seed"); it != values.end()) {
    c.set_seed(static_cast<std::uint64_t>(to_int("seed", it->second)));
  }
  for (const auto& [key, v] : values) {
    auto& m = c.model;
    auto& t = c.train;
    if (key == "seed") continue;
    else if (key == "layers") m.layers = static_cast<int>(to_int(key, v));
    else if (key == "dim") m.dim = static_cast<int>(to_int(key, v));
    else if (key == "tokens") m.tokens = static_cast<int>(to_int(key, v));
    else if (key == "heads") m.heads = static_cast<int>(to_int(key, v));
    else if (key == "state") m.state = static_cast<int>(to_int(key, v));
    else if (key == "alpha") m.alpha = to_double(key, v);
    else if (key == "experts") m.experts = static_cast<int>(to_int(key, v));
    else if (key == "ff_mult") m.ff_mult = static_cast<int>(to_int(key, v));
    else if (key == "saf") m.saf = to_bool(key, v);
    else if (key == "route_motifs") m.route_motifs = to_bool(key, v);
    else if (key == "learnable_eps") m.learnable_eps = to_bool(key, v);
    else if (key == "motif_min_freq") m.motif_min_freq = static_cast<int>(to_int(key, v));
    else if (key == "projectors") {
      if (v == "both") m.projectors = ProjectorMode::Both;
      else if (v == "attention") m.projectors = ProjectorMode::AttentionOnly;
      else if (v == "mamba") m.projectors = ProjectorMode::MambaOnly;
      else if (v == "none") throw Error(ErrorCode::InvalidToggleCombination, "projectors=none disables both projectors");
      else throw Error(ErrorCode::InvalidConfig, "projectors expects both, attention or mamba");
    } else if (key == "fusion") {
      if (v == "verbatim") m.fusion = FusionMode::Verbatim;
      else if (v == "weighted") m.fusion = FusionMode::Weighted;
      else throw Error(ErrorCode::InvalidConfig, "fusion expects verbatim or weighted");
    } else if (key == "aggregation") {
      if (v == "sum") m.aggregation = Aggregation::Sum;
      else if (v == "mean") m.aggregation = Aggregation::Mean;
      else throw Error(ErrorCode::InvalidConfig, "aggregation expects sum or mean");
    } else if (key == "task") {
      if (v == "regression") m.task = TaskKind::Regression;
      else if (v == "classification") m.task = TaskKind::Classification;
      else if (v == "multilabel") m.task = TaskKind::Multilabel;
      else throw Error(ErrorCode::InvalidConfig, "task expects regression, classification or multilabel");
    }
    else if (key == "lr") t.learning_rate = to_double(key, v);
    else if (key == "batch_size") t.batch_size = static_cast<std::size_t>(to_int(key, v));
    else if (key == "epochs") t.epochs = static_cast<int>(to_int(key, v));
    else if (key == "clip_norm") t.clip_norm = to_double(key, v);
    else if (key == "beta1") t.beta1 = to_double(key, v);
    else if (key == "beta2") t.beta2 = to_double(key, v);
    else if (key == "adam_eps") t.adam_eps = to_double(key, v);
    else if (key == "targets") t.targets = split_list(v);
    else if (key == "train_fraction") c.train_fraction = to_double(key, v);
    else if (key == "bin_width") c.bin_width = static_cast<int>(to_int(key, v));
    else if (key == "count") c.generator.count = static_cast<std::size_t>(to_int(key, v));
    else if (key == "min_atoms") c.generator.min_atoms = static_cast<int>(to_int(key, v));
    else if (key == "max_atoms") c.generator.max_atoms = static_cast<int>(to_int(key, v));
    else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
  if (!c.train.targets.empty()) c.model.outputs = static_cast<int>(c.train.targets.size());
  if (c.train_fraction <= 0.0 || c.train_fraction > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1]");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return apply_config(std::move(base), parse_key_values(buf.str()));
}

std::string format_config(const RunConfig& c) {
  const auto& m = c.model;
  const auto& t = c.train;
  std::ostringstream out;
  out << "seed=" << c.seed << '\n'
      << "layers=" << m.layers << '\n'
      << "dim=" << m.dim << '\n'
      << "tokens=" << m.tokens << '\n'
      << "heads=" << m.heads << '\n'
      << "state=" << m.state << '\n'
      << "alpha=" << format_number(m.alpha) << '\n'
      << "experts=" << m.experts << '\n'
      << "ff_mult=" << m.ff_mult << '\n'
      << "projectors=" << projector_name(m.projectors) << '\n'
      << "saf=" << (m.saf ? "true" : "false") << '\n'
      << "fusion=" << (m.fusion == FusionMode::Verbatim ? "verbatim" : "weighted") << '\n'
      << "route_motifs=" << (m.route_motifs ? "true" : "false") << '\n'
      << "aggregation=" << (m.aggregation == Aggregation::Sum ? "sum" : "mean") << '\n'
      << "learnable_eps=" << (m.learnable_eps ? "true" : "false") << '\n'
      << "motif_min_freq=" << m.motif_min_freq << '\n'
      << "task=" << task_name(m.task) << '\n'
      << "lr=" << format_number(t.learning_rate) << '\n'
      << "batch_size=" << t.batch_size << '\n'
      << "epochs=" << t.epochs << '\n'
      << "clip_norm=" << format_number(t.clip_norm) << '\n'
      << "beta1=" << format_number(t.beta1) << '\n'
      << "beta2=" << format_number(t.beta2) << '\n'
      << "adam_eps=" << format_number(t.adam_eps) << '\n';
  if (!t.targets.empty()) {
    out << "targets=";
    for (std::size_t i = 0; i < t.targets.size(); ++i) out << (i ? "," : "") << t.targets[i];
    out << '\n';
  }
  out << "train_fraction=" << format_number(c.train_fraction) << '\n'
      << "bin_width=" << c.bin_width << '\n'
      << "count=" << c.generator.count << '\n'
      << "min_atoms=" << c.generator.min_atoms << '\n'
      << "max_atoms=" << c.generator.max_atoms << '\n';
  return out.str();
}

}  // namespace hsa
