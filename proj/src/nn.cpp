#include "stcx/nn.hpp"

#include <cmath>

namespace stcx {

LinearParams LinearParams::init(int64_t in, int64_t out, std::mt19937_64& rng) {
    if (in <= 0 || out <= 0) throw ConfigError("linear: dimensions must be positive");
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    LinearParams p;
    p.weight = Tensor::uniform({in, out}, -bound, bound, rng, true);
    p.bias = Tensor::zeros({out}, true);
    return p;
}

LayerNormParams LayerNormParams::init(int64_t d) {
    LayerNormParams p;
    p.scale = Tensor::full({d}, 1.0, true);
    p.shift = Tensor::zeros({d}, true);
    return p;
}

MultiHeadAttentionParams MultiHeadAttentionParams::init(int64_t model_dim, int64_t num_heads,
                                                        std::mt19937_64& rng) {
    if (num_heads <= 0 || model_dim <= 0 || model_dim % num_heads != 0) {
        throw ConfigError("attention: model_dim " + std::to_string(model_dim) +
                          " not divisible by num_heads " + std::to_string(num_heads));
    }
    MultiHeadAttentionParams p;
    p.num_heads = num_heads;
    p.model_dim = model_dim;
    p.query = LinearParams::init(model_dim, model_dim, rng);
    p.key = LinearParams::init(model_dim, model_dim, rng);
    p.value = LinearParams::init(model_dim, model_dim, rng);
    p.out = LinearParams::init(model_dim, model_dim, rng);
    return p;
}

CrossAttentionBlockParams CrossAttentionBlockParams::init(int64_t model_dim, int64_t num_heads,
                                                          int64_t hidden, std::mt19937_64& rng) {
    CrossAttentionBlockParams p;
    p.attention = MultiHeadAttentionParams::init(model_dim, num_heads, rng);
    p.ffn1 = LinearParams::init(model_dim, hidden, rng);
    p.ffn2 = LinearParams::init(hidden, model_dim, rng);
    p.ln1 = LayerNormParams::init(model_dim);
    p.ln2 = LayerNormParams::init(model_dim);
    return p;
}

Tensor linear(const Tensor& x, const LinearParams& p, Tape* tape) {
    if (x.rank() != 2 || x.shape()[1] != p.weight.shape()[0]) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(p.weight.shape()));
    }
    return add_bias(matmul(x, p.weight, tape), p.bias, tape);
}

Tensor layer_norm(const Tensor& x, const Tensor& scale_t, const Tensor& shift_t, double eps,
                  Tape* tape) {
    if (x.rank() != 2) throw ShapeError("layer_norm: expects rank 2, got " + shape_str(x.shape()));
    int64_t n = x.shape()[0], d = x.shape()[1];
    if (scale_t.shape() != Shape{d} || shift_t.shape() != Shape{d})
        throw ShapeError("layer_norm: scale/shift must be length " + std::to_string(d));

    std::vector<double> xhat(x.size());
    std::vector<double> inv_std(n);
    std::vector<double> out_data(x.size());
    for (int64_t r = 0; r < n; ++r) {
        const double* row = x.data().data() + r * d;
        double mean = 0.0;
        for (int64_t c = 0; c < d; ++c) mean += row[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int64_t c = 0; c < d; ++c) {
            double h = (row[c] - mean) * is;
            xhat[r * d + c] = h;
            out_data[r * d + c] = scale_t.data()[c] * h + shift_t.data()[c];
        }
    }
    Tensor out(x.shape(), std::move(out_data));
    bool rg = tape && (x.requires_grad() || scale_t.requires_grad() || shift_t.requires_grad());
    if (rg) {
        out.set_requires_grad(true);
        auto xi = x.impl, si = scale_t.impl, bi = shift_t.impl, oi = out.impl;
        auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
        auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
        tape->record([xi, si, bi, oi, xh, istd, n, d]() {
            ensure_grad(oi);
            for (int64_t r = 0; r < n; ++r) {
                const double* dy = oi->grad.data() + r * d;
                const double* h = xh->data() + r * d;
                if (si->requires_grad) {
                    ensure_grad(si);
                    for (int64_t c = 0; c < d; ++c) si->grad[c] += dy[c] * h[c];
                }
                if (bi->requires_grad) {
                    ensure_grad(bi);
                    for (int64_t c = 0; c < d; ++c) bi->grad[c] += dy[c];
                }
                if (xi->requires_grad) {
                    ensure_grad(xi);
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (int64_t c = 0; c < d; ++c) {
                        double dh = dy[c] * si->data[c];
                        mean_dh += dh;
                        mean_dh_h += dh * h[c];
                    }
                    mean_dh /= static_cast<double>(d);
                    mean_dh_h /= static_cast<double>(d);
                    for (int64_t c = 0; c < d; ++c) {
                        double dh = dy[c] * si->data[c];
                        xi->grad[r * d + c] += (*istd)[r] * (dh - mean_dh - h[c] * mean_dh_h);
                    }
                }
            }
        });
    }
    return out;
}

Tensor multi_head_cross_attention(const Tensor& queries, const Tensor& context,
                                  const MultiHeadAttentionParams& p, Tape* tape,
                                  std::vector<Tensor>* attn_weights) {
    if (context.rank() != 2 || context.shape()[0] < 1)
        throw ShapeError("attention: empty context");
    if (queries.rank() != 2 || queries.shape()[1] != p.model_dim ||
        context.shape()[1] != p.model_dim) {
        throw ShapeError("attention: expected model_dim " + std::to_string(p.model_dim) +
                         ", got queries " + shape_str(queries.shape()) + " context " +
                         shape_str(context.shape()));
    }
    int64_t head_dim = p.model_dim / p.num_heads;
    Tensor q = linear(queries, p.query, tape);
    Tensor k = linear(context, p.key, tape);
    Tensor v = linear(context, p.value, tape);

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(p.num_heads);
    double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int64_t h = 0; h < p.num_heads; ++h) {
        Tensor qh = slice(q, 1, h * head_dim, head_dim, tape);
        Tensor kh = slice(k, 1, h * head_dim, head_dim, tape);
        Tensor vh = slice(v, 1, h * head_dim, head_dim, tape);
        Tensor logits = scale(matmul(qh, transpose(kh, tape), tape), inv_scale, tape);
        Tensor weights = softmax(logits, 1, tape);
        if (attn_weights) attn_weights->push_back(weights);
        head_outputs.push_back(matmul(weights, vh, tape));
    }
    Tensor merged = concat(head_outputs, 1, tape);
    return linear(merged, p.out, tape);
}

Tensor cross_attention_block(const Tensor& queries, const Tensor& context,
                             const CrossAttentionBlockParams& p, Tape* tape,
                             std::vector<Tensor>* attn_weights) {
    Tensor normed_q = layer_norm(queries, p.ln1.scale, p.ln1.shift, 1e-5, tape);
    Tensor attended = multi_head_cross_attention(normed_q, context, p.attention, tape, attn_weights);
    Tensor x = add(queries, attended, tape);
    Tensor normed_x = layer_norm(x, p.ln2.scale, p.ln2.shift, 1e-5, tape);
    Tensor ffn = linear(gelu(linear(normed_x, p.ffn1, tape), tape), p.ffn2, tape);
    return add(x, ffn, tape);
}

}  // namespace stcx
