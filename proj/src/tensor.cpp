#include "stcx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stcx {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void check_shape(const Shape& shape) {
    for (int64_t e : shape) {
        if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

void check_axis(const Tensor& a, int64_t axis, const char* op) {
    if (axis < 0 || axis >= a.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(a.rank()));
    }
}

struct AxisSplit {
    int64_t outer, extent, inner;
};

AxisSplit split_at(const Shape& shape, int64_t axis) {
    AxisSplit s{1, shape[axis], 1};
    for (int64_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

bool wants_grad(Tape* tape, std::initializer_list<const Tensor*> ins) {
    if (!tape) return false;
    for (const Tensor* t : ins)
        if (t->requires_grad()) return true;
    return false;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape(shape);
    int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_shape(shape);
    int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
    check_shape(shape);
    int64_t n = shape_numel(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(n);
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

void ensure_grad(const std::shared_ptr<TensorImpl>& impl) {
    if (impl->grad.size() != impl->data.size()) impl->grad.assign(impl->data.size(), 0.0);
}

std::vector<double>& Tensor::grad() {
    ensure_grad(impl);
    return impl->grad;
}

void Tensor::zero_grad() {
    impl->grad.assign(impl->data.size(), 0.0);
}

double Tensor::value() const {
    if (size() != 1) throw ShapeError("value() on non-scalar tensor " + shape_str(shape()));
    return impl->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    if (static_cast<int64_t>(idx.size()) != rank())
        throw ShapeError("at(): index rank mismatch");
    int64_t flat = 0;
    int64_t i = 0;
    for (int64_t v : idx) {
        if (v < 0 || v >= impl->shape[i]) throw ShapeError("at(): index out of range");
        flat = flat * impl->shape[i] + v;
        ++i;
    }
    return impl->data[flat];
}

bool Tensor::all_finite() const {
    for (double v : impl->data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tape::record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& out) {
    if (out.size() != 1) throw ShapeError("backward: output must be scalar");
    ensure_grad(out.impl);
    out.impl->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// --- elementwise ---

namespace {

// Shared implementation for same-shape binary ops with per-element
// gradient rules dL/da = da_fn(a, b, dout), etc.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const Tensor& a, const Tensor& b, Tape* tape, const char* name,
                 Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
    check_same_shape(a, b, name);
    std::vector<double> data(a.size());
    for (int64_t i = 0; i < a.size(); ++i) data[i] = fwd(a.data()[i], b.data()[i]);
    Tensor out(a.shape(), std::move(data));
    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        auto ai = a.impl, bi = b.impl, oi = out.impl;
        tape->record([ai, bi, oi, bwd_a, bwd_b]() {
            ensure_grad(oi);
            if (ai->requires_grad) {
                ensure_grad(ai);
                for (size_t i = 0; i < oi->data.size(); ++i)
                    ai->grad[i] += bwd_a(ai->data[i], bi->data[i], oi->grad[i]);
            }
            if (bi->requires_grad) {
                ensure_grad(bi);
                for (size_t i = 0; i < oi->data.size(); ++i)
                    bi->grad[i] += bwd_b(ai->data[i], bi->data[i], oi->grad[i]);
            }
        });
    }
    return out;
}

template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& a, Tape* tape, Fwd fwd, Deriv deriv) {
    std::vector<double> data(a.size());
    for (int64_t i = 0; i < a.size(); ++i) data[i] = fwd(a.data()[i]);
    Tensor out(a.shape(), std::move(data));
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi, deriv]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (size_t i = 0; i < oi->data.size(); ++i)
                ai->grad[i] += deriv(ai->data[i]) * oi->grad[i];
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    return binary_op(a, b, tape, "add",
                     [](double x, double y) { return x + y; },
                     [](double, double, double g) { return g; },
                     [](double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
    return binary_op(a, b, tape, "sub",
                     [](double x, double y) { return x - y; },
                     [](double, double, double g) { return g; },
                     [](double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
    return binary_op(a, b, tape, "mul",
                     [](double x, double y) { return x * y; },
                     [](double, double y, double g) { return y * g; },
                     [](double x, double, double g) { return x * g; });
}

Tensor scale(const Tensor& a, double c, Tape* tape) {
    return unary_op(a, tape, [c](double x) { return c * x; }, [c](double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c, Tape* tape) {
    return unary_op(a, tape, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Tensor exp_op(const Tensor& a, Tape* tape) {
    return unary_op(a, tape, [](double x) { return std::exp(x); },
                    [](double x) { return std::exp(x); });
}

Tensor relu(const Tensor& a, Tape* tape) {
    return unary_op(a, tape, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu_fwd(double x) {
    double u = kGeluC * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_deriv(double x) {
    double u = kGeluC * (x + 0.044715 * x * x * x);
    double t = std::tanh(u);
    double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}
}  // namespace

Tensor gelu(const Tensor& a, Tape* tape) {
    return unary_op(a, tape, gelu_fwd, gelu_deriv);
}

Tensor sigmoid(const Tensor& a, Tape* tape) {
    auto sig = [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                              : std::exp(x) / (1.0 + std::exp(x)); };
    return unary_op(a, tape, sig, [sig](double x) {
        double s = sig(x);
        return s * (1.0 - s);
    });
}

Tensor add_bias(const Tensor& x, const Tensor& bias, Tape* tape) {
    if (x.rank() != 2 || bias.rank() != 1 || x.shape()[1] != bias.shape()[0]) {
        throw ShapeError("add_bias: incompatible shapes " + shape_str(x.shape()) + " and " +
                         shape_str(bias.shape()));
    }
    int64_t n = x.shape()[0], d = x.shape()[1];
    std::vector<double> data(x.size());
    for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) data[r * d + c] = x.data()[r * d + c] + bias.data()[c];
    Tensor out(x.shape(), std::move(data));
    if (wants_grad(tape, {&x, &bias})) {
        out.set_requires_grad(true);
        auto xi = x.impl, bi = bias.impl, oi = out.impl;
        tape->record([xi, bi, oi, n, d]() {
            ensure_grad(oi);
            if (xi->requires_grad) {
                ensure_grad(xi);
                for (size_t i = 0; i < oi->data.size(); ++i) xi->grad[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                ensure_grad(bi);
                for (int64_t r = 0; r < n; ++r)
                    for (int64_t c = 0; c < d; ++c) bi->grad[c] += oi->grad[r * d + c];
            }
        });
    }
    return out;
}

// --- linear algebra ---

namespace {
// C[m x n] += A[m x k] * B[k x n], optionally transposing inputs.
void gemm_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n,
              bool trans_a, bool trans_b) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            double av = trans_a ? a[p * m + i] : a[i * k + p];
            if (av == 0.0) continue;
            for (int64_t j = 0; j < n; ++j) {
                double bv = trans_b ? b[j * k + p] : b[p * n + j];
                c[i * n + j] += av * bv;
            }
        }
    }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = Tensor::zeros({m, n});
    gemm_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n, false, false);
    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        auto ai = a.impl, bi = b.impl, oi = out.impl;
        tape->record([ai, bi, oi, m, k, n]() {
            ensure_grad(oi);
            if (ai->requires_grad) {
                ensure_grad(ai);
                // dA = dC * B^T
                gemm_acc(oi->grad.data(), bi->data.data(), ai->grad.data(), m, n, k, false, true);
            }
            if (bi->requires_grad) {
                ensure_grad(bi);
                // dB = A^T * dC
                gemm_acc(ai->data.data(), oi->grad.data(), bi->grad.data(), k, m, n, true, false);
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a, Tape* tape) {
    if (a.rank() != 2) throw ShapeError("transpose: expects rank 2, got " + shape_str(a.shape()));
    return permute(a, {1, 0}, tape);
}

// --- shape ---

Tensor reshape(const Tensor& a, Shape shape, Tape* tape) {
    check_shape(shape);
    if (shape_numel(shape) != a.size()) {
        throw ShapeError("reshape: cannot reshape " + shape_str(a.shape()) + " to " +
                         shape_str(shape));
    }
    Tensor out(std::move(shape), a.data());
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (size_t i = 0; i < oi->data.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

namespace {
// flat index mapping out[i] = in[perm_src(i)] for a permutation of axes.
std::vector<int64_t> permute_source_indices(const Shape& in_shape,
                                            const std::vector<int64_t>& perm) {
    int64_t rank = static_cast<int64_t>(in_shape.size());
    Shape out_shape(rank);
    for (int64_t i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
    std::vector<int64_t> in_strides(rank, 1);
    for (int64_t i = rank - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    int64_t n = shape_numel(in_shape);
    std::vector<int64_t> src(n);
    std::vector<int64_t> idx(rank, 0);
    for (int64_t flat = 0; flat < n; ++flat) {
        int64_t s = 0;
        for (int64_t i = 0; i < rank; ++i) s += idx[i] * in_strides[perm[i]];
        src[flat] = s;
        for (int64_t i = rank - 1; i >= 0; --i) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    return src;
}
}  // namespace

Tensor permute(const Tensor& a, const std::vector<int64_t>& perm, Tape* tape) {
    int64_t rank = a.rank();
    if (static_cast<int64_t>(perm.size()) != rank)
        throw ShapeError("permute: perm length mismatch");
    std::vector<bool> seen(rank, false);
    for (int64_t p : perm) {
        if (p < 0 || p >= rank || seen[p]) throw ShapeError("permute: invalid permutation");
        seen[p] = true;
    }
    Shape out_shape(rank);
    for (int64_t i = 0; i < rank; ++i) out_shape[i] = a.shape()[perm[i]];
    auto src = permute_source_indices(a.shape(), perm);
    std::vector<double> data(a.size());
    for (int64_t i = 0; i < a.size(); ++i) data[i] = a.data()[src[i]];
    Tensor out(std::move(out_shape), std::move(data));
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        auto src_shared = std::make_shared<std::vector<int64_t>>(std::move(src));
        tape->record([ai, oi, src_shared]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (size_t i = 0; i < oi->data.size(); ++i)
                ai->grad[(*src_shared)[i]] += oi->grad[i];
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis, Tape* tape) {
    if (parts.empty()) throw ShapeError("concat: empty input list");
    const Tensor& first = parts[0];
    check_axis(first, axis, "concat");
    Shape out_shape = first.shape();
    int64_t total_axis = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
        for (int64_t i = 0; i < first.rank(); ++i) {
            if (i != axis && p.shape()[i] != first.shape()[i])
                throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(first.shape()));
        }
        total_axis += p.shape()[axis];
    }
    out_shape[axis] = total_axis;
    auto os = split_at(out_shape, axis);
    Tensor out = Tensor::zeros(out_shape);
    bool rg = false;
    if (tape) {
        for (const Tensor& p : parts)
            if (p.requires_grad()) rg = true;
    }
    int64_t offset = 0;
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<int64_t> offsets;
    for (const Tensor& p : parts) {
        int64_t ext = p.shape()[axis];
        for (int64_t o = 0; o < os.outer; ++o) {
            const double* srcp = p.data().data() + o * ext * os.inner;
            double* dstp = out.data().data() + (o * total_axis + offset) * os.inner;
            std::copy(srcp, srcp + ext * os.inner, dstp);
        }
        impls.push_back(p.impl);
        offsets.push_back(offset);
        offset += ext;
    }
    if (rg) {
        out.set_requires_grad(true);
        auto oi = out.impl;
        tape->record([impls, offsets, oi, os, total_axis, axis]() {
            ensure_grad(oi);
            for (size_t k = 0; k < impls.size(); ++k) {
                auto& pi = impls[k];
                if (!pi->requires_grad) continue;
                ensure_grad(pi);
                int64_t ext = pi->shape[axis];
                for (int64_t o = 0; o < os.outer; ++o) {
                    const double* g = oi->grad.data() + (o * total_axis + offsets[k]) * os.inner;
                    double* dst = pi->grad.data() + o * ext * os.inner;
                    for (int64_t i = 0; i < ext * os.inner; ++i) dst[i] += g[i];
                }
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t len, Tape* tape) {
    check_axis(a, axis, "slice");
    if (start < 0 || len <= 0 || start + len > a.shape()[axis])
        throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for extent " +
                         std::to_string(a.shape()[axis]));
    auto s = split_at(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    Tensor out = Tensor::zeros(out_shape);
    for (int64_t o = 0; o < s.outer; ++o) {
        const double* srcp = a.data().data() + (o * s.extent + start) * s.inner;
        double* dstp = out.data().data() + o * len * s.inner;
        std::copy(srcp, srcp + len * s.inner, dstp);
    }
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi, s, start, len]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (int64_t o = 0; o < s.outer; ++o) {
                const double* g = oi->grad.data() + o * len * s.inner;
                double* dst = ai->grad.data() + (o * s.extent + start) * s.inner;
                for (int64_t i = 0; i < len * s.inner; ++i) dst[i] += g[i];
            }
        });
    }
    return out;
}

// --- reductions ---

Tensor softmax(const Tensor& a, int64_t axis, Tape* tape) {
    check_axis(a, axis, "softmax");
    auto s = split_at(a.shape(), axis);
    std::vector<double> data(a.size());
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t i = 0; i < s.inner; ++i) {
            int64_t base = o * s.extent * s.inner + i;
            double mx = a.data()[base];
            for (int64_t e = 1; e < s.extent; ++e)
                mx = std::max(mx, a.data()[base + e * s.inner]);
            double sum = 0.0;
            for (int64_t e = 0; e < s.extent; ++e) {
                double v = std::exp(a.data()[base + e * s.inner] - mx);
                data[base + e * s.inner] = v;
                sum += v;
            }
            for (int64_t e = 0; e < s.extent; ++e) data[base + e * s.inner] /= sum;
        }
    }
    Tensor out(a.shape(), std::move(data));
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi, s]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            // dx = y * (dy - sum(dy * y)) per slice
            for (int64_t o = 0; o < s.outer; ++o) {
                for (int64_t i = 0; i < s.inner; ++i) {
                    int64_t base = o * s.extent * s.inner + i;
                    double dot = 0.0;
                    for (int64_t e = 0; e < s.extent; ++e) {
                        int64_t k = base + e * s.inner;
                        dot += oi->grad[k] * oi->data[k];
                    }
                    for (int64_t e = 0; e < s.extent; ++e) {
                        int64_t k = base + e * s.inner;
                        ai->grad[k] += oi->data[k] * (oi->grad[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

namespace {
Shape reduced_shape(const Shape& shape, int64_t axis) {
    Shape out;
    for (int64_t i = 0; i < static_cast<int64_t>(shape.size()); ++i)
        if (i != axis) out.push_back(shape[i]);
    if (out.empty()) out.push_back(1);
    return out;
}
}  // namespace

Tensor reduce_sum(const Tensor& a, int64_t axis, Tape* tape) {
    check_axis(a, axis, "reduce_sum");
    auto s = split_at(a.shape(), axis);
    Tensor out = Tensor::zeros(reduced_shape(a.shape(), axis));
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t e = 0; e < s.extent; ++e)
            for (int64_t i = 0; i < s.inner; ++i)
                out.data()[o * s.inner + i] += a.data()[(o * s.extent + e) * s.inner + i];
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi, s]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (int64_t o = 0; o < s.outer; ++o)
                for (int64_t e = 0; e < s.extent; ++e)
                    for (int64_t i = 0; i < s.inner; ++i)
                        ai->grad[(o * s.extent + e) * s.inner + i] += oi->grad[o * s.inner + i];
        });
    }
    return out;
}

Tensor reduce_mean(const Tensor& a, int64_t axis, Tape* tape) {
    check_axis(a, axis, "reduce_mean");
    double inv = 1.0 / static_cast<double>(a.shape()[axis]);
    return scale(reduce_sum(a, axis, tape), inv, tape);
}

Tensor reduce_max(const Tensor& a, int64_t axis, Tape* tape) {
    check_axis(a, axis, "reduce_max");
    auto s = split_at(a.shape(), axis);
    Tensor out = Tensor::zeros(reduced_shape(a.shape(), axis));
    std::vector<int64_t> argmax(out.size(), 0);
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t i = 0; i < s.inner; ++i) {
            int64_t best = 0;
            double bv = a.data()[(o * s.extent) * s.inner + i];
            for (int64_t e = 1; e < s.extent; ++e) {
                double v = a.data()[(o * s.extent + e) * s.inner + i];
                if (v > bv) {
                    bv = v;
                    best = e;
                }
            }
            out.data()[o * s.inner + i] = bv;
            argmax[o * s.inner + i] = best;
        }
    }
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        auto am = std::make_shared<std::vector<int64_t>>(std::move(argmax));
        tape->record([ai, oi, am, s]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (int64_t o = 0; o < s.outer; ++o)
                for (int64_t i = 0; i < s.inner; ++i) {
                    int64_t k = o * s.inner + i;
                    ai->grad[(o * s.extent + (*am)[k]) * s.inner + i] += oi->grad[k];
                }
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a, Tape* tape) {
    double total = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    Tensor out = Tensor::scalar(total);
    if (wants_grad(tape, {&a})) {
        out.set_requires_grad(true);
        auto ai = a.impl, oi = out.impl;
        tape->record([ai, oi]() {
            ensure_grad(oi);
            if (!ai->requires_grad) return;
            ensure_grad(ai);
            for (auto& g : ai->grad) g += oi->grad[0];
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a, Tape* tape) {
    return scale(sum_all(a, tape), 1.0 / static_cast<double>(a.size()), tape);
}

double grad_check(const std::function<Tensor(Tape&)>& f, Tensor& x, double eps) {
    x.zero_grad();
    {
        Tape tape;
        Tensor y = f(tape);
        if (y.size() != 1) throw ShapeError("grad_check: f must return a scalar");
        tape.backward(y);
    }
    std::vector<double> analytic = x.grad();
    double max_err = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        double saved = x.data()[i];
        x.data()[i] = saved + eps;
        Tape tp;
        double yp = f(tp).value();
        x.data()[i] = saved - eps;
        Tape tm;
        double ym = f(tm).value();
        x.data()[i] = saved;
        if (!std::isfinite(yp) || !std::isfinite(ym)) {
            throw NumericError("grad_check: non-finite value while probing coordinate " +
                               std::to_string(i));
        }
        double numeric = (yp - ym) / (2.0 * eps);
        double a = analytic[i];
        double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

}  // namespace stcx
