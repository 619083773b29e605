#include "adaptsplat/tensor.hpp"

#include <sstream>

#include "adaptsplat/errors.hpp"

namespace adaptsplat {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor make_tensor(Shape shape, std::vector<double> values, DType dtype) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  if (dtype == DType::f32) {
    for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, DType dtype) {
  auto n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0), dtype);
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  auto n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, value), dtype);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, DType dtype) {
  return make_tensor(std::move(shape), std::move(values), dtype);
}

Tensor Tensor::scalar(double value) { return make_tensor({}, {value}, DType::f64); }

namespace {
const detail::TensorImpl& checked(const std::shared_ptr<detail::TensorImpl>& p) {
  if (!p) throw StateError("tensor: use of an undefined tensor");
  return *p;
}
}  // namespace

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(impl_).data.size(); }
DType Tensor::dtype() const { return checked(impl_).dtype; }
std::span<const double> Tensor::data() const { return checked(impl_).data; }

std::span<double> Tensor::mutable_data() {
  checked(impl_);
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("tensor: item() on non-scalar " + shape_str(shape()));
  }
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked(impl_);
  if (impl_->tape != nullptr) {
    throw StateError("tensor: requires_grad can only be toggled on leaves");
  }
  impl_->requires_grad = on;
  if (!on) impl_->grad.clear();
}

bool Tensor::has_grad() const { return !checked(impl_).grad.empty(); }

std::vector<double> Tensor::grad() const {
  const auto& impl = checked(impl_);
  if (impl.grad.empty()) return std::vector<double>(impl.data.size(), 0.0);
  return impl.grad;
}

void Tensor::zero_grad() {
  checked(impl_);
  impl_->grad.clear();
}

Tensor Tensor::detach() const {
  const auto& impl = checked(impl_);
  return make_tensor(impl.shape, impl.data, impl.dtype);
}

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<detail::TensorImpl> out, BackwardFn fn) {
  if (consumed_) throw StateError("tape: recording after backward; re-record on a new tape");
  out->requires_grad = true;
  out->tape = this;
  nodes_.push_back({std::move(out), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw ArgumentError("backward: undefined loss");
  if (loss.numel() != 1) {
    throw ArgumentError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  if (consumed_) throw StateError("backward: tape already consumed");
  auto impl = loss.impl();
  if (impl->tape != this) {
    throw ArgumentError("backward: loss was not recorded on this tape");
  }
  consumed_ = true;
  impl->grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;
    it->backward(it->out->grad);
  }
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (Tape::active() == nullptr) return false;
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

DType result_dtype(std::initializer_list<const Tensor*> inputs) {
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->dtype() == DType::f32) return DType::f32;
  }
  return DType::f64;
}

Tensor finish(Shape shape, std::vector<double> values, DType dtype, bool record,
              Tape::BackwardFn fn) {
  Tensor out = make_tensor(std::move(shape), std::move(values), dtype);
  if (record) Tape::active()->record(out.impl(), std::move(fn));
  return out;
}

}  // namespace detail

}  // namespace adaptsplat
