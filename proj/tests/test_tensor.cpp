#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stcx/tensor.hpp"

using namespace stcx;

namespace {

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, bool rg = false) {
    return Tensor::uniform(std::move(shape), -1.0, 1.0, rng, rg);
}

// Independent triple-loop matmul oracle.
std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
    int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> c(m * n, 0.0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            for (int64_t p = 0; p < k; ++p)
                c[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
    return c;
}

}  // namespace

TEST_CASE("matmul identity") {
    Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    std::mt19937_64 rng(1);
    Tensor b = rand_tensor({3, 4}, rng);
    Tensor c = matmul(eye, b);
    for (int64_t i = 0; i < b.size(); ++i) CHECK(c.data()[i] == doctest::Approx(b.data()[i]));
}

TEST_CASE("matmul hand arithmetic") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.data()[0] == 3.0);
    CHECK(c.data()[1] == 7.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    std::mt19937_64 rng(2);
    Tensor a = rand_tensor({5, 7}, rng);
    Tensor b = rand_tensor({7, 3}, rng);
    Tensor c = matmul(a, b);
    auto expected = matmul_oracle(a, b);
    for (int64_t i = 0; i < c.size(); ++i)
        CHECK(std::abs(c.data()[i] - expected[i]) < 1e-12);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("softmax all-equal logits") {
    Tensor x({4}, {2.5, 2.5, 2.5, 2.5});
    Tensor y = softmax(x, 0);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax limit case") {
    Tensor x({2}, {0.0, 500.0});
    Tensor y = softmax(x, 0);
    CHECK(y.data()[0] < 1e-100);
    CHECK(y.data()[1] == doctest::Approx(1.0));
}

TEST_CASE("softmax matches direct exp/sum oracle") {
    std::mt19937_64 rng(3);
    Tensor x = rand_tensor({8}, rng);
    Tensor y = softmax(x, 0);
    double denom = 0.0;
    for (double v : x.data()) denom += std::exp(v);
    double sum = 0.0;
    for (int64_t i = 0; i < 8; ++i) {
        CHECK(std::abs(y.data()[i] - std::exp(x.data()[i]) / denom) < 1e-12);
        CHECK(y.data()[i] > 0.0);
        CHECK(y.data()[i] <= 1.0);
        sum += y.data()[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("reduce ops constant tensor") {
    Tensor x = Tensor::full({3, 4}, 2.5);
    Tensor m = reduce_mean(x, 1);
    Tensor mx = reduce_max(x, 0);
    CHECK(m.shape() == Shape{3});
    CHECK(mx.shape() == Shape{4});
    for (double v : m.data()) CHECK(v == doctest::Approx(2.5));
    for (double v : mx.data()) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("reduce_mean arithmetic") {
    Tensor x({2}, {1.0, 3.0});
    CHECK(reduce_mean(x, 0).value() == doctest::Approx(2.0));
}

TEST_CASE("reductions match loop oracle on each axis") {
    std::mt19937_64 rng(4);
    Tensor x = rand_tensor({4, 3, 2}, rng);
    for (int64_t axis = 0; axis < 3; ++axis) {
        Tensor mean = reduce_mean(x, axis);
        Tensor mx = reduce_max(x, axis);
        Shape shape = x.shape();
        int64_t extent = shape[axis];
        // explicit loop oracle
        for (int64_t a = 0; a < shape[0]; ++a)
            for (int64_t b = 0; b < shape[1]; ++b)
                for (int64_t c = 0; c < shape[2]; ++c) {
                    int64_t idx[3] = {a, b, c};
                    if (idx[axis] != 0) continue;
                    double sum = 0.0, best = -1e300;
                    for (int64_t e = 0; e < extent; ++e) {
                        int64_t j[3] = {a, b, c};
                        j[axis] = e;
                        double v = x.at({j[0], j[1], j[2]});
                        sum += v;
                        best = std::max(best, v);
                    }
                    int64_t out_idx[2];
                    int64_t k = 0;
                    for (int64_t i = 0; i < 3; ++i)
                        if (i != axis) out_idx[k++] = idx[i];
                    CHECK(std::abs(mean.at({out_idx[0], out_idx[1]}) - sum / extent) < 1e-12);
                    CHECK(mx.at({out_idx[0], out_idx[1]}) == best);
                }
    }
}

TEST_CASE("grad_check linear function") {
    std::mt19937_64 rng(5);
    Tensor x = rand_tensor({6}, rng, true);
    double err = grad_check([&](Tape& t) { return sum_all(x, &t); }, x);
    CHECK(err < 1e-10);
    Tape t;
    Tensor y = sum_all(x, &t);
    x.zero_grad();
    t.backward(y);
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("grad_check sum of squares") {
    Tensor x({2}, {1.0, 2.0}, true);
    auto f = [&](Tape& t) { return sum_all(mul(x, x, &t), &t); };
    double err = grad_check(f, x);
    CHECK(err < 1e-8);
    Tape t;
    Tensor y = f(t);
    x.zero_grad();
    t.backward(y);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("grad_check over registered ops on random tensors") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x = rand_tensor({3, 4}, rng, true);
        Tensor w = rand_tensor({3, 4}, rng);
        Tensor m = rand_tensor({4, 3}, rng);
        std::function<Tensor(Tape&)> fns[] = {
            [&](Tape& t) { return mean_all(mul(softmax(x, 1, &t), w, &t), &t); },
            [&](Tape& t) { return mean_all(mul(gelu(x, &t), w, &t), &t); },
            [&](Tape& t) { return mean_all(mul(sigmoid(x, &t), w, &t), &t); },
            [&](Tape& t) { return mean_all(matmul(x, m, &t), &t); },
            [&](Tape& t) { return sum_all(mul(reduce_max(x, 1, &t), reduce_mean(w, 1, &t), &t), &t); },
            [&](Tape& t) { return mean_all(mul(exp_op(scale(x, 0.5, &t), &t), w, &t), &t); },
        };
        CHECK(grad_check(fns[trial % 6], x) < 1e-4);
    }
}

TEST_CASE("reshape and permute round-trip bit-exactly") {
    std::mt19937_64 rng(7);
    Tensor x = rand_tensor({2, 3, 4}, rng);
    Tensor r = reshape(reshape(x, {4, 6}), {2, 3, 4});
    Tensor p = permute(permute(x, {2, 0, 1}), {1, 2, 0});
    for (int64_t i = 0; i < x.size(); ++i) {
        CHECK(r.data()[i] == x.data()[i]);
        CHECK(p.data()[i] == x.data()[i]);
    }
}

TEST_CASE("gradient of reused tensor accumulates") {
    Tensor x({3}, {1.0, 2.0, 3.0}, true);
    Tape t;
    Tensor y = sum_all(add(x, x, &t), &t);
    x.zero_grad();
    t.backward(y);
    for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("reduce_max ties route gradient to first argmax") {
    Tensor x({3}, {2.0, 2.0, 1.0}, true);
    Tape t;
    Tensor y = sum_all(reduce_max(x, 0, &t), &t);
    x.zero_grad();
    t.backward(y);
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("forward ops keep finite inputs finite") {
    std::mt19937_64 rng(8);
    Tensor x = rand_tensor({4, 4}, rng);
    CHECK(softmax(x, 0).all_finite());
    CHECK(gelu(x).all_finite());
    CHECK(reduce_mean(x, 1).all_finite());
    CHECK(matmul(x, x).all_finite());
}

TEST_CASE("grad_check reports non-finite probe with coordinate") {
    Tensor x({2}, {1.0, -1.0}, true);
    auto f = [&](Tape& t) {
        Tensor y = exp_op(scale(x, 1000.0, &t), &t);
        return sum_all(y, &t);
    };
    CHECK_THROWS_AS(grad_check(f, x), NumericError);
}

TEST_CASE("slice and concat are inverse") {
    std::mt19937_64 rng(9);
    Tensor x = rand_tensor({5, 3}, rng);
    Tensor top = slice(x, 0, 0, 2);
    Tensor bottom = slice(x, 0, 2, 3);
    Tensor joined = concat({top, bottom}, 0);
    for (int64_t i = 0; i < x.size(); ++i) CHECK(joined.data()[i] == x.data()[i]);
}
