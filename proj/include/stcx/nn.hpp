#pragma once

#include <random>
#include <string>
#include <vector>

#include "stcx/tensor.hpp"

namespace stcx {

struct LinearParams {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]

    static LinearParams init(int64_t in, int64_t out, std::mt19937_64& rng);

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }
};

struct LayerNormParams {
    Tensor scale;  // [d]
    Tensor shift;  // [d]

    static LayerNormParams init(int64_t d);

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".scale", scale);
        f(prefix + ".shift", shift);
    }
};

struct MultiHeadAttentionParams {
    int64_t num_heads = 0;
    int64_t model_dim = 0;
    LinearParams query, key, value, out;

    static MultiHeadAttentionParams init(int64_t model_dim, int64_t num_heads,
                                         std::mt19937_64& rng);

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        query.visit(prefix + ".q", f);
        key.visit(prefix + ".k", f);
        value.visit(prefix + ".v", f);
        out.visit(prefix + ".out", f);
    }
};

struct CrossAttentionBlockParams {
    MultiHeadAttentionParams attention;
    LinearParams ffn1, ffn2;  // model_dim -> hidden -> model_dim, gelu between
    LayerNormParams ln1, ln2;

    static CrossAttentionBlockParams init(int64_t model_dim, int64_t num_heads, int64_t hidden,
                                          std::mt19937_64& rng);

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        attention.visit(prefix + ".attn", f);
        ffn1.visit(prefix + ".ffn1", f);
        ffn2.visit(prefix + ".ffn2", f);
        ln1.visit(prefix + ".ln1", f);
        ln2.visit(prefix + ".ln2", f);
    }
};

Tensor linear(const Tensor& x, const LinearParams& p, Tape* tape = nullptr);

Tensor layer_norm(const Tensor& x, const Tensor& scale, const Tensor& shift, double eps = 1e-5,
                  Tape* tape = nullptr);

// Scaled dot-product cross attention over all heads. Queries [n_q x d] attend
// to context tokens [n_kv x d]; per-head attention matrices are optionally
// exposed through attn_weights.
Tensor multi_head_cross_attention(const Tensor& queries, const Tensor& context,
                                  const MultiHeadAttentionParams& p, Tape* tape = nullptr,
                                  std::vector<Tensor>* attn_weights = nullptr);

// Pre-norm residual wiring:
//   x   = queries + MHA(LN(queries), context)
//   out = x + FFN(LN(x))
Tensor cross_attention_block(const Tensor& queries, const Tensor& context,
                             const CrossAttentionBlockParams& p, Tape* tape = nullptr,
                             std::vector<Tensor>* attn_weights = nullptr);

}  // namespace stcx
