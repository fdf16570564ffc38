#include "hsa/params.hpp"

#include <cmath>

#include "hsa/error.hpp"
#include "hsa/ops.hpp"

namespace hsa {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (contains(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter " + name);
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return add(name, Tensor(std::move(shape), std::move(values)));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value));
}

Tensor ParameterStore::add_values(const std::string& name, Shape shape, std::vector<double> values) {
  return add(name, Tensor(std::move(shape), std::move(values)));
}

Tensor ParameterStore::get(const std::string& name) const {
  for (const auto& [key, t] : entries_) {
    if (key == name) return t;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown parameter " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return true;
  }
  return false;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.second);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

std::vector<std::vector<double>> ParameterStore::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& entry : entries_) {
    out.emplace_back(entry.second.values().begin(), entry.second.values().end());
  }
  return out;
}

void ParameterStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != entries_.size()) throw Error(ErrorCode::ShapeMismatch, "snapshot size");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].second.mutable_values();
    if (dst.size() != values[i].size()) throw Error(ErrorCode::ShapeMismatch, "snapshot tensor size");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      Rng& rng, bool with_bias) {
  Linear l;
  l.weight = store.add_uniform(name + ".weight", {in, out}, in, rng);
  if (with_bias) l.bias = store.add_uniform(name + ".bias", {out}, in, rng);
  else l.bias = Tensor::zeros({0});
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.numel() == 0 ? y : add_bias(y, bias);
}

LayerNormParams LayerNormParams::create(ParameterStore& store, const std::string& name, std::size_t dim) {
  return {store.add_constant(name + ".gain", {dim}, 1.0), store.add_constant(name + ".bias", {dim}, 0.0)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layernorm(x, gain, bias); }

FeedForward FeedForward::create(ParameterStore& store, const std::string& name, std::size_t in,
                                std::size_t hidden, std::size_t out, Rng& rng) {
  return {Linear::create(store, name + ".up", in, hidden, rng), Linear::create(store, name + ".down", hidden, out, rng)};
}

Tensor FeedForward::operator()(const Tensor& x) const { return down(silu(up(x))); }

}  // namespace hsa
