#include "hsa/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hsa/error.hpp"

namespace hsa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->values.assign(1, 0.0); }

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "shape " + shape_str(shape) + " does not hold " +
                                              std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.front().size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape()[1];
  if (rank() == 1) return shape()[0];
  return 1;
}

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorCode::NotScalar, "item() on " + shape_str(shape()));
  return impl_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->values); }

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape::~Tape() { clear(); }

void Tape::clear() {
  for (auto& e : entries_) {
    e.output->tape = nullptr;
    e.output->tape_id.reset();
  }
  entries_.clear();
}

void Tape::record(const std::shared_ptr<TensorImpl>& output,
                  const std::vector<const TensorImpl*>& inputs, Backward backward) {
  Entry entry;
  entry.output = output;
  for (const auto* in : inputs) {
    if (in->tape == this && in->tape_id) entry.input_ids.push_back(*in->tape_id);
  }
  entry.backward = std::move(backward);
  output->tape = this;
  output->tape_id = entries_.size();
  output->requires_grad = true;
  entries_.push_back(std::move(entry));
}

void Tape::backward(const Tensor& loss) {
  const auto& impl = *loss.impl();
  if (loss.numel() != 1) {
    throw Error(ErrorCode::NotScalar, "backward needs a scalar loss, got " + shape_str(loss.shape()));
  }
  if (impl.tape != this || !impl.tape_id) {
    throw Error(ErrorCode::DetachedFromTape, "loss was not recorded on this tape");
  }
  const std::size_t last = *impl.tape_id;
  for (std::size_t i = 0; i <= last; ++i) entries_[i].output->grad.clear();
  entries_[last].output->grad.assign(1, 1.0);
  for (std::size_t i = last + 1; i-- > 0;) {
    const auto& e = entries_[i];
    if (e.output->grad.empty()) continue;
    e.backward(*e.output);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw Error(ErrorCode::NotScalar, "backward needs a scalar loss, got " + shape_str(loss.shape()));
  }
  auto* tape = loss.impl()->tape;
  if (tape == nullptr) throw Error(ErrorCode::DetachedFromTape, "loss is not on any tape");
  tape->backward(loss);
}

// ---------------------------------------------------------------------------

namespace {
struct ReplayState {
  StopGradientReplay::Mode mode = StopGradientReplay::Mode::Off;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<int>> choices;
  std::size_t value_cursor = 0;
  std::size_t choice_cursor = 0;
};
thread_local ReplayState g_replay;
}  // namespace

StopGradientReplay::Mode StopGradientReplay::mode() { return g_replay.mode; }

void StopGradientReplay::set_mode(Mode mode) {
  g_replay.mode = mode;
  if (mode == Mode::Record) {
    g_replay.values.clear();
    g_replay.choices.clear();
  }
  g_replay.value_cursor = 0;
  g_replay.choice_cursor = 0;
}

void StopGradientReplay::reset() {
  g_replay = ReplayState{};
}

std::vector<double> StopGradientReplay::filter_values(std::vector<double> values) {
  switch (g_replay.mode) {
    case Mode::Off:
      return values;
    case Mode::Record:
      g_replay.values.push_back(values);
      return values;
    case Mode::Replay: {
      if (g_replay.value_cursor >= g_replay.values.size() ||
          g_replay.values[g_replay.value_cursor].size() != values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "stop-gradient replay diverged from recording");
      }
      return g_replay.values[g_replay.value_cursor++];
    }
  }
  return values;
}

std::vector<int> StopGradientReplay::filter_choice(std::vector<int> choice) {
  switch (g_replay.mode) {
    case Mode::Off:
      return choice;
    case Mode::Record:
      g_replay.choices.push_back(choice);
      return choice;
    case Mode::Replay: {
      if (g_replay.choice_cursor >= g_replay.choices.size() ||
          g_replay.choices[g_replay.choice_cursor].size() != choice.size()) {
        throw Error(ErrorCode::ShapeMismatch, "routing replay diverged from recording");
      }
      return g_replay.choices[g_replay.choice_cursor++];
    }
  }
  return choice;
}

ReplayScope::ReplayScope(StopGradientReplay::Mode mode) : previous_(StopGradientReplay::mode()) {
  StopGradientReplay::set_mode(mode);
}

ReplayScope::~ReplayScope() {
  g_replay.mode = previous_;
  g_replay.value_cursor = 0;
  g_replay.choice_cursor = 0;
}

}  // namespace hsa
