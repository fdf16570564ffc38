#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hsa/tensor.hpp"

namespace hsa {

struct FiniteDiffOptions {
  double eps = 1e-5;
  /// Coordinates sampled per tensor; 0 checks every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<double> per_tensor_max;
};

/// |a - b| / max(1e-8, |a| + |b|)
double relative_error(double analytic, double numeric);

/// Compares tape gradients of the scalar f() with central differences
/// (f(θ+eps·e_i) − f(θ−eps·e_i)) / (2·eps). Stop-gradient values and routing
/// choices are held at their base-point values during the perturbed passes,
/// so the numeric derivative is that of the function the tape differentiates.
FiniteDiffReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                   const FiniteDiffOptions& options = {});

}  // namespace hsa
