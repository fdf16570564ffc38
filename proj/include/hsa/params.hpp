#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hsa/tensor.hpp"

namespace hsa {

using Rng = std::mt19937_64;

/// Named, ordered collection of trainable tensors.
class ParameterStore {
 public:
  /// Uniform(−1/√fan_in, +1/√fan_in) initialisation.
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);
  Tensor add_values(const std::string& name, Shape shape, std::vector<double> values);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  std::size_t scalar_count() const;

  void zero_grad();
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Affine map x·W + b with W stored in×out.
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  static LayerNormParams create(ParameterStore& store, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const;
};

/// Two-layer feed-forward map in → hidden → out with SiLU.
struct FeedForward {
  Linear up;
  Linear down;

  static FeedForward create(ParameterStore& store, const std::string& name, std::size_t in,
                            std::size_t hidden, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace hsa
