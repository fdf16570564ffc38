#include "hsa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace hsa {

double relative_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
}

FiniteDiffReport finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                   const FiniteDiffOptions& options) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    ReplayScope replay(StopGradientReplay::Mode::Record);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }
  for (const auto& p : params) analytic.push_back(p.grad());

  auto evaluate = [&]() {
    ReplayScope replay(StopGradientReplay::Mode::Replay);
    NoGradScope no_grad;
    return f().item();
  };

  FiniteDiffReport report;
  std::mt19937_64 rng(options.seed);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = params[t];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    double tensor_max = 0.0;
    auto values = p.mutable_values();
    for (auto i : coords) {
      const double original = values[i];
      values[i] = original + options.eps;
      const double plus = evaluate();
      values[i] = original - options.eps;
      const double minus = evaluate();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double err = relative_error(analytic[t][i], numeric);
      ++report.coords_checked;
      tensor_max = std::max(tensor_max, err);
      if (err > report.max_rel_error || report.coords_checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_tensor = t;
        report.worst_index = i;
        report.worst_analytic = analytic[t][i];
        report.worst_numeric = numeric;
      }
    }
    report.per_tensor_max.push_back(tensor_max);
  }
  StopGradientReplay::reset();
  return report;
}

}  // namespace hsa
