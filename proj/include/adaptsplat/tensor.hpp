#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adaptsplat {

using Shape = std::vector<std::size_t>;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

namespace detail {

struct TensorImpl {
  Shape shape;
  DType dtype = DType::f64;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const Tape* tape = nullptr;  // tape that produced this value, if any

  std::span<double> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share storage; values are treated
/// as immutable once an op has produced them. Storage is always double; an
/// f32 tensor has its values rounded to float precision on creation.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor from(Shape shape, std::vector<double> values,
                     DType dtype = DType::f64);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t numel() const;
  DType dtype() const;

  std::span<const double> data() const;
  /// Writable view for leaves (parameter updates, test perturbation).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  /// Marks a leaf as a trainable parameter. Outputs of recorded ops are
  /// always gradient-carrying; this only applies to leaves.
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient buffer; zeros when nothing has been accumulated.
  std::vector<double> grad() const;
  void zero_grad();

  /// Copy of the values with no tape participation.
  Tensor detach() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  friend Tensor make_tensor(Shape, std::vector<double>, DType);

  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Builds a fresh (untracked) tensor; dtype f32 rounds values to float.
Tensor make_tensor(Shape shape, std::vector<double> values, DType dtype);

/// Reverse-mode recording. A tape is active on the current thread while a
/// `Tape::Scope` for it is alive; ops whose inputs require gradients append
/// one node each. Nodes run in strict reverse recording order, once.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  /// Seeds d loss / d loss = 1 and propagates to every recorded input.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void record(std::shared_ptr<detail::TensorImpl> out, BackwardFn fn);

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> out;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace detail {

/// True when an active tape exists and any input needs a gradient.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

DType result_dtype(std::initializer_list<const Tensor*> inputs);

/// Wraps `values` as an op output and, if recording, attaches `fn`.
Tensor finish(Shape shape, std::vector<double> values, DType dtype,
              bool record, Tape::BackwardFn fn);

}  // namespace detail

}  // namespace adaptsplat
