#include "hsa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "hsa/error.hpp"
#include "hsa/kernels.hpp"

namespace hsa {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (active_tape() == nullptr) return false;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void record(const Tensor& out, std::vector<const TensorImpl*> inputs, Tape::Backward fn) {
  active_tape()->record(out.impl(), inputs, std::move(fn));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, op + ": " + shape_str(a) + " vs " + shape_str(b));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw Error(ErrorCode::ShapeMismatch, std::string(op) + " needs a matrix, got " + shape_str(t.shape()));
}

// Broadcast plan for a binary elementwise op.
struct Broadcast {
  Shape shape;
  std::size_t n;
  bool a_scalar;
  bool b_scalar;
};

Broadcast plan_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return {a.shape(), a.numel(), false, false};
  if (a.numel() == 1 && b.numel() == 1) {
    return {a.rank() >= b.rank() ? a.shape() : b.shape(), 1, false, false};
  }
  if (b.numel() == 1) return {a.shape(), a.numel(), false, true};
  if (a.numel() == 1) return {b.shape(), b.numel(), true, false};
  shape_error(op, a.shape(), b.shape());
}

// Generic binary op: f(x, y) with partials (dfdx, dfdy).
template <class F, class Dx, class Dy>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, Dx dfdx, Dy dfdy) {
  const auto plan = plan_binary(a, b, name);
  std::vector<double> out(plan.n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < plan.n; ++i) {
    out[i] = f(av[plan.a_scalar ? 0 : i], bv[plan.b_scalar ? 0 : i]);
  }
  Tensor result(plan.shape, std::move(out));
  if (should_record({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl();
    record(result, {ai.get(), bi.get()}, [ai, bi, plan, dfdx, dfdy](const TensorImpl& o) {
      for (std::size_t i = 0; i < plan.n; ++i) {
        const double g = o.grad[i];
        if (g == 0.0) continue;
        const std::size_t ia = plan.a_scalar ? 0 : i;
        const std::size_t ib = plan.b_scalar ? 0 : i;
        const double x = ai->values[ia];
        const double y = bi->values[ib];
        if (ai->requires_grad) ai->accumulate(ia, g * dfdx(x, y));
        if (bi->requires_grad) bi->accumulate(ib, g * dfdy(x, y));
      }
    });
  }
  return result;
}

// Generic unary op given value and derivative (the derivative may use x and y).
template <class F, class D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  Tensor result(a.shape(), std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl();
    record(result, {ai.get()}, [ai, dfdx](const TensorImpl& o) {
      if (!ai->requires_grad) return;
      for (std::size_t i = 0; i < o.values.size(); ++i) {
        const double g = o.grad[i];
        if (g != 0.0) ai->accumulate(i, g * dfdx(ai->values[i], o.values[i]));
      }
    });
  }
  return result;
}

}  // namespace

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// --- elementwise -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, [](double x) { return sigmoid_value(x); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, [](double x) { return x * sigmoid_value(x); },
      [](double x, double) {
        const double s = sigmoid_value(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return softplus_value(x); }, [](double x, double) { return sigmoid_value(x); });
}

// --- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n);
  kernels::matmul(a.values(), b.values(), out, {m, k, n});
  Tensor result({m, n}, std::move(out));
  if (should_record({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl();
    record(result, {ai.get(), bi.get()}, [ai, bi, m, k, n](const TensorImpl& o) {
      if (ai->requires_grad) {
        if (ai->grad.empty()) ai->grad.assign(m * k, 0.0);
        kernels::matmul_nt_acc(o.grad, bi->values, ai->grad, {m, k, n});
      }
      if (bi->requires_grad) {
        if (bi->grad.empty()) bi->grad.assign(k * n, 0.0);
        kernels::matmul_tn_acc(ai->values, o.grad, bi->grad, {m, k, n});
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor result({n, m}, std::move(out));
  if (should_record({&a})) {
    ImplPtr ai = a.impl();
    record(result, {ai.get()}, [ai, m, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ai->accumulate(i * n + j, o.grad[j * m + i]);
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  Tensor result(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
  if (should_record({&a})) {
    ImplPtr ai = a.impl();
    record(result, {ai.get()}, [ai](const TensorImpl& o) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->accumulate(i, o.grad[i]);
    });
  }
  return result;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (bias.numel() != n) shape_error("add_bias", x.shape(), bias.shape());
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  Tensor result(x.shape(), std::move(out));
  if (should_record({&x, &bias})) {
    ImplPtr xi = x.impl(), bi = bias.impl();
    record(result, {xi.get(), bi.get()}, [xi, bi, m, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = o.grad[i * n + j];
          if (xi->requires_grad) xi->accumulate(i * n + j, g);
          if (bi->requires_grad) bi->accumulate(j, g);
        }
      }
    });
  }
  return result;
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_matrix(x, "scale_rows");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (s.numel() != m) shape_error("scale_rows", x.shape(), s.shape());
  std::vector<double> out(m * n);
  const auto xv = x.values();
  const auto sv = s.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  Tensor result(x.shape(), std::move(out));
  if (should_record({&x, &s})) {
    ImplPtr xi = x.impl(), si = s.impl();
    record(result, {xi.get(), si.get()}, [xi, si, m, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i) {
        double gs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double g = o.grad[i * n + j];
          if (xi->requires_grad) xi->accumulate(i * n + j, g * si->values[i]);
          gs += g * xi->values[i * n + j];
        }
        if (si->requires_grad) si->accumulate(i, gs);
      }
    });
  }
  return result;
}

// --- normalisation ------------------------------------------------------------

Tensor softmax_rows(const Tensor& x, const RowMask& column_mask) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "softmax_rows over zero columns");
  if (!column_mask.empty() && column_mask.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "softmax mask length differs from column count");
  }
  auto keep = [&](std::size_t j) { return column_mask.empty() || column_mask[j]; };
  bool any = false;
  for (std::size_t j = 0; j < n; ++j) any = any || keep(j);
  if (!any) throw Error(ErrorCode::EmptyMask, "softmax with every column masked");

  const auto xv = x.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double v = xv[i * n + j];
      if (std::isnan(v)) throw Error(ErrorCode::NaNInput, "softmax_rows received NaN");
      if (keep(j)) mx = std::max(mx, v);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!keep(j)) continue;
      out[i * n + j] = std::exp(xv[i * n + j] - mx);
      total += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= total;
  }
  Tensor result(x.shape(), std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, m, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += o.grad[i * n + j] * o.values[i * n + j];
        for (std::size_t j = 0; j < n; ++j) {
          const double y = o.values[i * n + j];
          if (y != 0.0) xi->accumulate(i * n + j, y * (o.grad[i * n + j] - dot));
        }
      }
    });
  }
  return result;
}

namespace {

Tensor layernorm_impl(const Tensor& x, const Tensor* gain, const Tensor* bias) {
  require_matrix(x, "layernorm");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (gain && gain->numel() != n) shape_error("layernorm gain", x.shape(), gain->shape());
  if (bias && bias->numel() != n) shape_error("layernorm bias", x.shape(), bias->shape());
  const auto xv = x.values();
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double dv = xv[i * n + j] - mu;
      var += dv * dv;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[i * n + j] - mu) * is;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * (gain ? gain->values()[j] : 1.0) + (bias ? bias->values()[j] : 0.0);
    }
  }
  Tensor result(x.shape(), std::move(out));
  const Tensor none;
  const bool rec = gain ? should_record({&x, gain, bias ? bias : &none}) : should_record({&x});
  if (rec) {
    ImplPtr xi = x.impl();
    ImplPtr gi = gain ? gain->impl() : nullptr;
    ImplPtr bi = bias ? bias->impl() : nullptr;
    std::vector<const TensorImpl*> ins{xi.get()};
    if (gi) ins.push_back(gi.get());
    if (bi) ins.push_back(bi.get());
    record(result, ins, [xi, gi, bi, xhat, inv_std, m, n](const TensorImpl& o) {
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double g = o.grad[i * n + j];
          const double h = (*xhat)[i * n + j];
          if (gi && gi->requires_grad) gi->accumulate(j, g * h);
          if (bi && bi->requires_grad) bi->accumulate(j, g);
          dxhat[j] = g * (gi ? gi->values[j] : 1.0);
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * h;
        }
        if (!xi->requires_grad) continue;
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const double h = (*xhat)[i * n + j];
          xi->accumulate(i * n + j, (*inv_std)[i] * (dxhat[j] - mean_d - h * mean_dx));
        }
      }
    });
  }
  return result;
}

}  // namespace

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  return layernorm_impl(x, &gain, &bias);
}

Tensor layernorm(const Tensor& x) { return layernorm_impl(x, nullptr, nullptr); }

// --- reductions -----------------------------------------------------------------

Tensor mean_pool(const Tensor& x, const RowMask& mask) {
  const std::size_t m = x.rows(), n = x.cols();
  if (!mask.empty() && mask.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, "mean_pool mask length differs from row count");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < m; ++i) count += (mask.empty() || mask[i]) ? 1 : 0;
  if (count == 0) throw Error(ErrorCode::EmptyMask, "mean_pool with every row masked");
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<double> out(n, 0.0);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += xv[i * n + j];
  }
  for (auto& v : out) v *= inv;
  Tensor result({n}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, mask, m, n, inv](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i) {
        if (!mask.empty() && !mask[i]) continue;
        for (std::size_t j = 0; j < n; ++j) xi->accumulate(i * n + j, o.grad[j] * inv);
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor result = Tensor::scalar(total);
  if (should_record({&a})) {
    ImplPtr ai = a.impl();
    record(result, {ai.get()}, [ai](const TensorImpl& o) {
      for (std::size_t i = 0; i < ai->values.size(); ++i) ai->accumulate(i, o.grad[0]);
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

// --- structural -----------------------------------------------------------------

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.cols() != n || p.rank() > 2) shape_error("concat_rows", parts.front().shape(), p.shape());
    m += p.rows();
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Tensor result({m, n}, std::move(out));
  if (should_record(parts)) {
    std::vector<ImplPtr> ins;
    std::vector<const TensorImpl*> raw;
    for (const auto& p : parts) {
      ins.push_back(p.impl());
      raw.push_back(p.impl().get());
    }
    record(result, raw, [ins](const TensorImpl& o) {
      std::size_t offset = 0;
      for (const auto& in : ins) {
        const std::size_t len = in->values.size();
        if (in->requires_grad) {
          for (std::size_t i = 0; i < len; ++i) in->accumulate(i, o.grad[offset + i]);
        }
        offset += len;
      }
    });
  }
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != m) shape_error("concat_cols", parts.front().shape(), p.shape());
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * n + col + j] = pv[i * widths[k] + j];
    col += widths[k];
  }
  Tensor result({m, n}, std::move(out));
  if (should_record(parts)) {
    std::vector<ImplPtr> ins;
    std::vector<const TensorImpl*> raw;
    for (const auto& p : parts) {
      ins.push_back(p.impl());
      raw.push_back(p.impl().get());
    }
    record(result, raw, [ins, widths, m, n](const TensorImpl& o) {
      std::size_t c0 = 0;
      for (std::size_t k = 0; k < ins.size(); ++k) {
        if (ins[k]->requires_grad) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
              ins[k]->accumulate(i * widths[k] + j, o.grad[i * n + c0 + j]);
        }
        c0 += widths[k];
      }
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (begin + count > n) throw Error(ErrorCode::ShapeMismatch, "slice_cols out of range");
  std::vector<double> out(m * count);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * n + begin + j];
  Tensor result({m, count}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, m, n, begin, count](const TensorImpl& o) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) xi->accumulate(i * n + begin + j, o.grad[i * count + j]);
    });
  }
  return result;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& index) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(index.size() * n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= m) {
      throw Error(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(index[i] * n), n, out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  Tensor result({index.size(), n}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, index, n](const TensorImpl& o) {
      if (!xi->requires_grad) return;
      if (xi->grad.empty()) xi->grad.assign(xi->values.size(), 0.0);
      for (std::size_t i = 0; i < index.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) xi->grad[index[i] * n + j] += o.grad[i * n + j];
    });
  }
  return result;
}

Tensor scatter_add_rows(const Tensor& x, const std::vector<int>& index, std::size_t rows) {
  const std::size_t n = x.cols();
  if (index.size() != x.rows()) throw Error(ErrorCode::ShapeMismatch, "scatter_add_rows index length");
  std::vector<double> out(rows * n, 0.0);
  const auto xv = x.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= rows) {
      throw Error(ErrorCode::ShapeMismatch, "scatter_add_rows index out of range");
    }
    for (std::size_t j = 0; j < n; ++j) out[index[i] * n + j] += xv[i * n + j];
  }
  Tensor result({rows, n}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, index, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < index.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) xi->accumulate(i * n + j, o.grad[index[i] * n + j]);
    });
  }
  return result;
}

Tensor pick(const Tensor& x, const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.size() != cols.size()) throw Error(ErrorCode::ShapeMismatch, "pick index lengths differ");
  const std::size_t n = x.cols();
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = x.values()[rows[i] * n + cols[i]];
  Tensor result({rows.size()}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, rows, cols, n](const TensorImpl& o) {
      for (std::size_t i = 0; i < rows.size(); ++i) xi->accumulate(rows[i] * n + cols[i], o.grad[i]);
    });
  }
  return result;
}

Tensor segment_mean(const Tensor& x, const std::vector<std::vector<int>>& segments) {
  const std::size_t n = x.cols();
  std::vector<double> out(segments.size() * n, 0.0);
  const auto xv = x.values();
  for (std::size_t k = 0; k < segments.size(); ++k) {
    if (segments[k].empty()) throw Error(ErrorCode::EmptyMask, "empty pooling segment");
    const double inv = 1.0 / static_cast<double>(segments[k].size());
    for (int r : segments[k])
      for (std::size_t j = 0; j < n; ++j) out[k * n + j] += xv[r * n + j];
    for (std::size_t j = 0; j < n; ++j) out[k * n + j] *= inv;
  }
  Tensor result({segments.size(), n}, std::move(out));
  if (should_record({&x})) {
    ImplPtr xi = x.impl();
    record(result, {xi.get()}, [xi, segments, n](const TensorImpl& o) {
      for (std::size_t k = 0; k < segments.size(); ++k) {
        const double inv = 1.0 / static_cast<double>(segments[k].size());
        for (int r : segments[k])
          for (std::size_t j = 0; j < n; ++j) xi->accumulate(r * n + j, o.grad[k * n + j] * inv);
      }
    });
  }
  return result;
}

Tensor detach(const Tensor& a) {
  std::vector<double> v(a.values().begin(), a.values().end());
  return Tensor(a.shape(), StopGradientReplay::filter_values(std::move(v)));
}

// --- graph and sequence kernels ----------------------------------------------------

Tensor aggregate_neighbors(const Tensor& h, const std::vector<std::vector<int>>& neighbors, bool mean) {
  require_matrix(h, "aggregate_neighbors");
  const std::size_t n = h.shape()[0], d = h.shape()[1];
  if (neighbors.size() != n) throw Error(ErrorCode::ShapeMismatch, "neighbour lists do not match rows");
  std::vector<double> out(n * d);
  kernels::aggregate_neighbors(h.values(), d, neighbors, mean, out);
  Tensor result({n, d}, std::move(out));
  if (should_record({&h})) {
    ImplPtr hi = h.impl();
    auto nbr = std::make_shared<std::vector<std::vector<int>>>(neighbors);
    record(result, {hi.get()}, [hi, nbr, d, mean](const TensorImpl& o) {
      if (hi->grad.empty()) hi->grad.assign(hi->values.size(), 0.0);
      for (std::size_t v = 0; v < nbr->size(); ++v) {
        const auto& list = (*nbr)[v];
        if (list.empty()) continue;
        const double w = mean ? 1.0 / static_cast<double>(list.size()) : 1.0;
        for (int u : list)
          for (std::size_t c = 0; c < d; ++c) hi->grad[u * d + c] += w * o.grad[v * d + c];
      }
    });
  }
  return result;
}

Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& b, const Tensor& c,
                      const Tensor& a, const Tensor& skip, const std::vector<double>& gamma) {
  require_matrix(x, "selective_scan");
  const std::size_t steps = x.shape()[0], channels = x.shape()[1];
  const std::size_t state = a.cols();
  if (delta.shape() != x.shape()) shape_error("selective_scan delta", x.shape(), delta.shape());
  if (b.rows() != steps || b.cols() != state) shape_error("selective_scan B", x.shape(), b.shape());
  if (c.rows() != steps || c.cols() != state) shape_error("selective_scan C", x.shape(), c.shape());
  if (a.rows() != channels) shape_error("selective_scan A", x.shape(), a.shape());
  if (skip.numel() != channels) shape_error("selective_scan D", x.shape(), skip.shape());
  if (gamma.size() != steps) {
    throw Error(ErrorCode::ShapeMismatch, "selective_scan needs one gap factor per step");
  }

  const kernels::ScanDims dims{steps, channels, state};
  std::vector<double> y(steps * channels);
  // Per-step states are kept only for the backward pass.
  const bool recording = should_record({&x, &delta, &b, &c, &a, &skip});
  auto states = std::make_shared<std::vector<double>>(recording ? steps * channels * state : 0);
  kernels::selective_scan({x.values(), delta.values(), b.values(), c.values(), a.values(), skip.values(), gamma},
                          dims, y, *states);
  Tensor result({steps, channels}, std::move(y));

  if (recording) {
    ImplPtr xi = x.impl(), di = delta.impl(), bi = b.impl(), ci = c.impl(), ai = a.impl(), si = skip.impl();
    record(result, {xi.get(), di.get(), bi.get(), ci.get(), ai.get(), si.get()},
           [=](const TensorImpl& o) {
             const std::size_t n = steps, d = channels, s = state;
             std::vector<double> gx(n * d, 0.0), gd(n * d, 0.0), gb(n * s, 0.0), gc(n * s, 0.0);
             std::vector<double> ga(d * s, 0.0), gskip(d, 0.0);
             const auto& X = xi->values;
             const auto& Dt = di->values;
             const auto& B = bi->values;
             const auto& C = ci->values;
             const auto& A = ai->values;
             const auto& Sk = si->values;
             const auto& S = *states;
             std::vector<double> gs(s);
             for (std::size_t ch = 0; ch < d; ++ch) {
               std::fill(gs.begin(), gs.end(), 0.0);
               for (std::size_t t = n; t-- > 0;) {
                 const double gy = o.grad[t * d + ch];
                 const double xv = X[t * d + ch];
                 const double dt = Dt[t * d + ch];
                 gskip[ch] += gy * xv;
                 gx[t * d + ch] += gy * Sk[ch];
                 const double* st = S.data() + (t * d + ch) * s;
                 const double* prev = t > 0 ? S.data() + ((t - 1) * d + ch) * s : nullptr;
                 for (std::size_t j = 0; j < s; ++j) {
                   gc[t * s + j] += gy * st[j];
                   gs[j] += gy * C[t * s + j];
                   const double decay = std::exp(-dt * A[ch * s + j] * gamma[t]);
                   const double sp = prev ? prev[j] : 0.0;
                   const double g_decay = gs[j] * sp;
                   gd[t * d + ch] += g_decay * (-A[ch * s + j] * gamma[t] * decay) + gs[j] * B[t * s + j] * xv;
                   ga[ch * s + j] += g_decay * (-dt * gamma[t] * decay);
                   gb[t * s + j] += gs[j] * dt * xv;
                   gx[t * d + ch] += gs[j] * dt * B[t * s + j];
                   gs[j] *= decay;
                 }
               }
             }
             auto flush = [](const ImplPtr& p, const std::vector<double>& g) {
               if (!p->requires_grad) return;
               for (std::size_t i = 0; i < g.size(); ++i) p->accumulate(i, g[i]);
             };
             flush(xi, gx);
             flush(di, gd);
             flush(bi, gb);
             flush(ci, gc);
             flush(ai, ga);
             flush(si, gskip);
           });
  }
  return result;
}

// --- losses ---------------------------------------------------------------------

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta) {
  if (pred.shape() != target.shape()) shape_error("smooth_l1", pred.shape(), target.shape());
  const auto pv = pred.values();
  const auto tv = target.values();
  std::vector<double> out(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double dv = pv[i] - tv[i];
    const double ad = std::fabs(dv);
    out[i] = ad < beta ? 0.5 * dv * dv / beta : ad - 0.5 * beta;
  }
  Tensor result(pred.shape(), std::move(out));
  if (should_record({&pred})) {
    ImplPtr pi = pred.impl(), ti = target.impl();
    record(result, {pi.get()}, [pi, ti, beta](const TensorImpl& o) {
      for (std::size_t i = 0; i < o.values.size(); ++i) {
        const double dv = pi->values[i] - ti->values[i];
        const double slope = std::fabs(dv) < beta ? dv / beta : (dv > 0 ? 1.0 : -1.0);
        pi->accumulate(i, o.grad[i] * slope);
      }
    });
  }
  return result;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) shape_error("bce_with_logits", logits.shape(), targets.shape());
  const auto zv = logits.values();
  const auto yv = targets.values();
  std::vector<double> out(zv.size());
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double z = zv[i];
    out[i] = std::max(z, 0.0) - z * yv[i] + std::log1p(std::exp(-std::fabs(z)));
  }
  Tensor result(logits.shape(), std::move(out));
  if (should_record({&logits})) {
    ImplPtr zi = logits.impl(), yi = targets.impl();
    record(result, {zi.get()}, [zi, yi](const TensorImpl& o) {
      for (std::size_t i = 0; i < o.values.size(); ++i) {
        zi->accumulate(i, o.grad[i] * (sigmoid_value(zi->values[i]) - yi->values[i]));
      }
    });
  }
  return result;
}

}  // namespace hsa
