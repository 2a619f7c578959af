#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stcx/errors.hpp"

namespace stcx {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // sized lazily; empty means all-zero
};

// Dense row-major tensor of doubles. Copy is shallow (shared storage);
// forward ops always allocate fresh outputs, so values are effectively
// immutable once produced.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                          bool requires_grad = false);

    bool defined() const { return impl != nullptr; }
    const Shape& shape() const { return impl->shape; }
    int64_t rank() const { return static_cast<int64_t>(impl->shape.size()); }
    int64_t size() const { return static_cast<int64_t>(impl->data.size()); }

    std::vector<double>& data() { return impl->data; }
    const std::vector<double>& data() const { return impl->data; }

    bool requires_grad() const { return impl->requires_grad; }
    void set_requires_grad(bool rg) { impl->requires_grad = rg; }

    // Grad buffer, allocated zero-filled on first access.
    std::vector<double>& grad();
    void zero_grad();

    double value() const;  // scalar tensors only
    double at(std::initializer_list<int64_t> idx) const;

    bool all_finite() const;

    std::shared_ptr<TensorImpl> impl;
};

void ensure_grad(const std::shared_ptr<TensorImpl>& impl);

// Records backward closures during a forward pass. Nodes are stored in the
// order ops executed, so reverse iteration is a valid topological sweep.
class Tape {
public:
    void record(std::function<void()> backward_fn);

    // Seeds d(out)/d(out) = 1 on a scalar output and runs all backward
    // rules in reverse. Gradients accumulate additively into each
    // tensor's grad buffer.
    void backward(const Tensor& out);

    size_t num_nodes() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double c, Tape* tape = nullptr);
Tensor add_scalar(const Tensor& a, double c, Tape* tape = nullptr);
Tensor exp_op(const Tensor& a, Tape* tape = nullptr);
Tensor relu(const Tensor& a, Tape* tape = nullptr);
Tensor gelu(const Tensor& a, Tape* tape = nullptr);  // tanh approximation
Tensor sigmoid(const Tensor& a, Tape* tape = nullptr);

// Adds a length-d bias vector to every row of an [n x d] matrix.
Tensor add_bias(const Tensor& x, const Tensor& bias, Tape* tape = nullptr);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);  // 2-D

// --- shape ---
Tensor reshape(const Tensor& a, Shape shape, Tape* tape = nullptr);
Tensor permute(const Tensor& a, const std::vector<int64_t>& perm, Tape* tape = nullptr);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis, Tape* tape = nullptr);
Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t len, Tape* tape = nullptr);

// --- reductions ---
Tensor softmax(const Tensor& a, int64_t axis, Tape* tape = nullptr);
Tensor reduce_mean(const Tensor& a, int64_t axis, Tape* tape = nullptr);
Tensor reduce_sum(const Tensor& a, int64_t axis, Tape* tape = nullptr);
// Ties route the gradient to the first argmax in scan order.
Tensor reduce_max(const Tensor& a, int64_t axis, Tape* tape = nullptr);
Tensor sum_all(const Tensor& a, Tape* tape = nullptr);
Tensor mean_all(const Tensor& a, Tape* tape = nullptr);

// Central-difference gradient check. f must rebuild the forward pass from
// the current contents of x on every call and return a scalar. Returns the
// max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<Tensor(Tape&)>& f, Tensor& x, double eps = 1e-5);

}  // namespace stcx
