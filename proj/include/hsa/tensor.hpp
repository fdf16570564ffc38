#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hsa {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::optional<std::size_t> tape_id;

  void accumulate(std::size_t i, double g) {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    grad[i] += g;
  }
  double grad_at(std::size_t i) const { return grad.empty() ? 0.0 : grad[i]; }
};

/// Dense row-major float64 array. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->values.size(); }
  /// Rows of a rank-2 tensor; 1 for vectors and scalars.
  std::size_t rows() const;
  /// Columns of a rank-2 tensor, length of a vector, 1 for a scalar.
  std::size_t cols() const;

  std::span<const double> values() const { return impl_->values; }
  /// Mutable access; intended for leaves (parameters, inputs).
  std::span<double> mutable_values() { return impl_->values; }
  double item() const;
  double operator[](std::size_t i) const { return impl_->values[i]; }
  double at(std::size_t r, std::size_t c) const { return impl_->values[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  /// Gradient buffer; zeros when nothing has accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  bool on_tape() const { return impl_->tape_id.has_value(); }
  std::optional<std::size_t> tape_id() const { return impl_->tape_id; }

  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Define-by-run record of differentiable operations, in execution order.
class Tape {
 public:
  using Backward = std::function<void(const TensorImpl& out)>;

  struct Entry {
    std::shared_ptr<TensorImpl> output;
    std::vector<std::size_t> input_ids;  // tape ids of recorded inputs (leaves omitted)
    Backward backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Append an operation; links `output` to this tape.
  void record(const std::shared_ptr<TensorImpl>& output,
              const std::vector<const TensorImpl*>& inputs, Backward backward);

  /// Reverse sweep from a scalar loss. Leaf gradients accumulate across calls;
  /// intermediate gradients are reset on each call.
  void backward(const Tensor& loss);

  void clear();
  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t id) const { return entries_[id]; }

 private:
  std::vector<Entry> entries_;
};

/// Installs a tape as the thread's recording target for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording on this thread for its lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Thread's active tape, or nullptr when operations are not being recorded.
Tape* active_tape();

/// Backward from a loss recorded on some tape. Throws NotScalar or DetachedFromTape.
void backward(const Tensor& loss);

/// Stop-gradient values can be captured on one forward pass and replayed on
/// later passes. The finite-difference checker uses this so that straight-through
/// factors and discrete routing decisions stay at their base-point values while
/// parameters are perturbed.
class StopGradientReplay {
 public:
  enum class Mode { Off, Record, Replay };

  static Mode mode();
  static void set_mode(Mode mode);
  static void reset();

  /// Hook used by detach(): returns the value to use for a stop-gradient tensor.
  static std::vector<double> filter_values(std::vector<double> values);
  /// Hook used by discrete routing: returns the decision to use.
  static std::vector<int> filter_choice(std::vector<int> choice);
};

class ReplayScope {
 public:
  explicit ReplayScope(StopGradientReplay::Mode mode);
  ~ReplayScope();
  ReplayScope(const ReplayScope&) = delete;
  ReplayScope& operator=(const ReplayScope&) = delete;

 private:
  StopGradientReplay::Mode previous_;
};

}  // namespace hsa
