#pragma once

#include <map>
#include <string>
#include <vector>

#include "stcx/features.hpp"
#include "stcx/nn.hpp"

namespace stcx {

enum class AblationVariant {
    baseline,                          // classifier on mean-pooled actor feature, no attention
    spatial_ctx,                       // one block over concat temporally-pooled maps, pooled actors
    spatial_ctx_spatial_actors,        // same context, 49 actor query tokens
    spatiotemporal_ctx,                // two-block head, pooled actors
    spatiotemporal_ctx_spatial_actors  // the full head
};

AblationVariant parse_variant(const std::string& name);
std::string variant_name(AblationVariant v);
const std::vector<AblationVariant>& all_variants();
bool variant_uses_spatial_actors(AblationVariant v);

struct HeadConfig {
    int64_t slow_channels = 16;
    int64_t fast_channels = 4;
    int64_t num_heads = 4;
    int64_t ffn_hidden = 0;  // 0 -> 2 * model_dim
    int64_t num_classes = 6;
    int64_t spatial_tokens = 64;   // H*W of the feature grid (context position table size)
    int64_t temporal_tokens = 8;   // T_f (context position table size)
    bool actor_pos_embedding = true;
    bool context_pos_embedding = false;
    AblationVariant variant = AblationVariant::spatiotemporal_ctx_spatial_actors;

    int64_t model_dim() const { return slow_channels + fast_channels; }
    int64_t ffn_width() const { return ffn_hidden > 0 ? ffn_hidden : 2 * model_dim(); }
    void validate() const;
};

struct HeadParams {
    HeadConfig config;
    LinearParams slow_projection;  // C_s -> C
    LinearParams fast_projection;  // C_f -> C
    CrossAttentionBlockParams block_spatial;
    CrossAttentionBlockParams block_temporal;
    LinearParams classifier_hidden;  // C -> C
    LinearParams classifier_out;     // C -> num_classes
    Tensor actor_pos_embed;          // [49 x C]
    Tensor slow_ctx_pos_embed;       // [spatial_tokens x C]
    Tensor fast_ctx_pos_embed;       // [temporal_tokens x C]

    static HeadParams init(const HeadConfig& config, uint64_t seed);

    template <typename F>
    void visit(F&& f) {
        slow_projection.visit("slow_projection", f);
        fast_projection.visit("fast_projection", f);
        block_spatial.visit("block_spatial", f);
        block_temporal.visit("block_temporal", f);
        classifier_hidden.visit("classifier_hidden", f);
        classifier_out.visit("classifier_out", f);
        f("actor_pos_embed", actor_pos_embed);
        f("slow_ctx_pos_embed", slow_ctx_pos_embed);
        f("fast_ctx_pos_embed", fast_ctx_pos_embed);
    }

    std::vector<std::string> param_names();
};

struct HeadStats {
    int attention_calls = 0;
};

struct HeadOutput {
    Tensor logits;  // [N x num_classes]
    Tensor scores;  // sigmoid(logits)
};

// Per-channel max over token positions: [n x C] -> [C].
Tensor global_max_pool(const Tensor& tokens, Tape* tape = nullptr);

HeadOutput head_forward(const std::vector<ActorFeature>& actors, const ContextMaps& ctx,
                        HeadParams& p, Tape* tape = nullptr, HeadStats* stats = nullptr);

// Mean binary cross-entropy over all actor/class cells, computed on logits.
Tensor bce_loss(const Tensor& logits, const Tensor& labels, Tape* tape = nullptr);

struct SgdOptimizer {
    double lr = 1e-3;
    double momentum = 0.9;
    std::map<std::string, std::vector<double>> velocity;

    // velocity = momentum * velocity + grad; param -= lr * velocity
    void step(HeadParams& params);
};

}  // namespace stcx
