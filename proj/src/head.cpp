#include "stcx/head.hpp"

#include <cmath>

namespace stcx {

AblationVariant parse_variant(const std::string& name) {
    if (name == "baseline") return AblationVariant::baseline;
    if (name == "spatial_ctx") return AblationVariant::spatial_ctx;
    if (name == "spatial_ctx+spatial_actors") return AblationVariant::spatial_ctx_spatial_actors;
    if (name == "spatiotemporal_ctx") return AblationVariant::spatiotemporal_ctx;
    if (name == "spatiotemporal_ctx+spatial_actors")
        return AblationVariant::spatiotemporal_ctx_spatial_actors;
    throw ConfigError("unknown ablation variant: " + name);
}

std::string variant_name(AblationVariant v) {
    switch (v) {
        case AblationVariant::baseline: return "baseline";
        case AblationVariant::spatial_ctx: return "spatial_ctx";
        case AblationVariant::spatial_ctx_spatial_actors: return "spatial_ctx+spatial_actors";
        case AblationVariant::spatiotemporal_ctx: return "spatiotemporal_ctx";
        case AblationVariant::spatiotemporal_ctx_spatial_actors:
            return "spatiotemporal_ctx+spatial_actors";
    }
    throw ConfigError("unknown ablation variant enum value");
}

const std::vector<AblationVariant>& all_variants() {
    static const std::vector<AblationVariant> v = {
        AblationVariant::baseline,
        AblationVariant::spatial_ctx,
        AblationVariant::spatial_ctx_spatial_actors,
        AblationVariant::spatiotemporal_ctx,
        AblationVariant::spatiotemporal_ctx_spatial_actors,
    };
    return v;
}

bool variant_uses_spatial_actors(AblationVariant v) {
    return v == AblationVariant::spatial_ctx_spatial_actors ||
           v == AblationVariant::spatiotemporal_ctx_spatial_actors;
}

void HeadConfig::validate() const {
    if (slow_channels <= 0 || fast_channels <= 0 || num_heads <= 0 || num_classes <= 0 ||
        spatial_tokens <= 0 || temporal_tokens <= 0)
        throw ConfigError("HeadConfig: all dimensions must be positive");
    if (model_dim() % num_heads != 0)
        throw ConfigError("HeadConfig: model_dim " + std::to_string(model_dim()) +
                          " not divisible by num_heads " + std::to_string(num_heads));
}

HeadParams HeadParams::init(const HeadConfig& config, uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    int64_t c = config.model_dim();
    HeadParams p;
    p.config = config;
    p.slow_projection = LinearParams::init(config.slow_channels, c, rng);
    p.fast_projection = LinearParams::init(config.fast_channels, c, rng);
    p.block_spatial = CrossAttentionBlockParams::init(c, config.num_heads, config.ffn_width(), rng);
    p.block_temporal = CrossAttentionBlockParams::init(c, config.num_heads, config.ffn_width(), rng);
    p.classifier_hidden = LinearParams::init(c, c, rng);
    p.classifier_out = LinearParams::init(c, config.num_classes, rng);
    double pos_bound = 0.5;
    p.actor_pos_embed = Tensor::uniform({49, c}, -pos_bound, pos_bound, rng, true);
    p.slow_ctx_pos_embed =
        Tensor::uniform({config.spatial_tokens, c}, -pos_bound, pos_bound, rng, true);
    p.fast_ctx_pos_embed =
        Tensor::uniform({config.temporal_tokens, c}, -pos_bound, pos_bound, rng, true);
    return p;
}

std::vector<std::string> HeadParams::param_names() {
    std::vector<std::string> names;
    visit([&](const std::string& name, Tensor&) { names.push_back(name); });
    return names;
}

Tensor global_max_pool(const Tensor& tokens, Tape* tape) {
    if (tokens.rank() != 2 || tokens.shape()[0] < 1)
        throw ShapeError("global_max_pool: expects [n x C] with n >= 1");
    return reduce_max(tokens, 0, tape);
}

namespace {

Tensor add_positions(const Tensor& tokens, const Tensor& table, Tape* tape, const char* what) {
    int64_t n = tokens.shape()[0];
    if (table.shape()[0] < n)
        throw ConfigError(std::string(what) + ": position table has " +
                          std::to_string(table.shape()[0]) + " rows, need " + std::to_string(n));
    return add(tokens, slice(table, 0, 0, n, tape), tape);
}

Tensor classify(const Tensor& pooled_row, HeadParams& p, Tape* tape) {
    Tensor hidden = gelu(linear(pooled_row, p.classifier_hidden, tape), tape);
    return linear(hidden, p.classifier_out, tape);
}

}  // namespace

HeadOutput head_forward(const std::vector<ActorFeature>& actors, const ContextMaps& ctx,
                        HeadParams& p, Tape* tape, HeadStats* stats) {
    p.config.validate();
    if (actors.empty()) throw ShapeError("head_forward: no actors");
    int64_t c = p.config.model_dim();
    AblationVariant variant = p.config.variant;
    bool spatial_actors = variant_uses_spatial_actors(variant);

    // Context token sets, prepared once per clip.
    Tensor spatial_context, temporal_context;
    if (variant == AblationVariant::spatial_ctx ||
        variant == AblationVariant::spatial_ctx_spatial_actors) {
        if (!ctx.concat_tokens.defined() || ctx.concat_tokens.shape()[0] < 1)
            throw ShapeError("head_forward: empty context token set");
        spatial_context = ctx.concat_tokens;
        if (p.config.context_pos_embedding)
            spatial_context =
                add_positions(spatial_context, p.slow_ctx_pos_embed, tape, "spatial context");
    } else if (variant == AblationVariant::spatiotemporal_ctx ||
               variant == AblationVariant::spatiotemporal_ctx_spatial_actors) {
        if (!ctx.slow_tokens.defined() || ctx.slow_tokens.shape()[0] < 1 ||
            !ctx.fast_tokens.defined() || ctx.fast_tokens.shape()[0] < 1)
            throw ShapeError("head_forward: empty context token set");
        spatial_context = linear(ctx.slow_tokens, p.slow_projection, tape);
        temporal_context = linear(ctx.fast_tokens, p.fast_projection, tape);
        if (p.config.context_pos_embedding) {
            spatial_context =
                add_positions(spatial_context, p.slow_ctx_pos_embed, tape, "spatial context");
            temporal_context =
                add_positions(temporal_context, p.fast_ctx_pos_embed, tape, "temporal context");
        }
    }

    std::vector<Tensor> logit_rows;
    logit_rows.reserve(actors.size());
    for (const ActorFeature& actor : actors) {
        if (actor.tokens.shape() != Shape{49, c})
            throw ShapeError("head_forward: actor tokens " + shape_str(actor.tokens.shape()) +
                             ", expected [49 x " + std::to_string(c) + "]");
        Tensor q;
        if (spatial_actors) {
            q = actor.tokens;
            if (p.config.actor_pos_embedding) q = add(q, p.actor_pos_embed, tape);
        } else {
            q = reshape(reduce_mean(actor.tokens, 0, tape), {1, c}, tape);
        }

        Tensor enriched = q;
        if (variant != AblationVariant::baseline) {
            if (stats) ++stats->attention_calls;
            enriched = cross_attention_block(enriched, spatial_context, p.block_spatial, tape);
            if (temporal_context.defined()) {
                if (stats) ++stats->attention_calls;
                enriched = cross_attention_block(enriched, temporal_context, p.block_temporal, tape);
            }
        }
        Tensor pooled = reshape(global_max_pool(enriched, tape), {1, c}, tape);
        logit_rows.push_back(classify(pooled, p, tape));
    }
    HeadOutput out;
    out.logits = logit_rows.size() == 1 ? logit_rows[0] : concat(logit_rows, 0, tape);
    out.scores = sigmoid(out.logits, tape);
    if (!out.scores.all_finite()) throw NumericError("head_forward: non-finite scores");
    return out;
}

Tensor bce_loss(const Tensor& logits, const Tensor& labels, Tape* tape) {
    if (logits.shape() != labels.shape())
        throw ShapeError("bce_loss: logits " + shape_str(logits.shape()) + " vs labels " +
                         shape_str(labels.shape()));
    int64_t n = logits.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double z = logits.data()[i];
        double y = labels.data()[i];
        // softplus(z) - y*z, numerically stable
        total += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z;
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (tape && logits.requires_grad()) {
        out.set_requires_grad(true);
        auto li = logits.impl, yi = labels.impl, oi = out.impl;
        tape->record([li, yi, oi, n]() {
            ensure_grad(oi);
            if (!li->requires_grad) return;
            ensure_grad(li);
            double g = oi->grad[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                double z = li->data[i];
                double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                li->grad[i] += g * (s - yi->data[i]);
            }
        });
    }
    return out;
}

void SgdOptimizer::step(HeadParams& params) {
    params.visit([&](const std::string& name, Tensor& t) {
        auto& vel = velocity[name];
        if (vel.size() != t.data().size()) vel.assign(t.data().size(), 0.0);
        auto& grad = t.grad();
        for (size_t i = 0; i < grad.size(); ++i) {
            if (!std::isfinite(grad[i]))
                throw NumericError("sgd_step: non-finite gradient in parameter " + name);
            vel[i] = momentum * vel[i] + grad[i];
            t.data()[i] -= lr * vel[i];
        }
    });
}

}  // namespace stcx
