#include "stcx/features.hpp"

#include <algorithm>
#include <cmath>

namespace stcx {

void PathwayFeatures::validate() const {
    if (!slow.defined() || !fast.defined() || slow.rank() != 4 || fast.rank() != 4)
        throw ShapeError("PathwayFeatures: both maps must be rank-4 tensors");
    if (fast.shape()[0] <= slow.shape()[0] || slow.shape()[0] < 1)
        throw ShapeError("PathwayFeatures: requires T_f > T_s >= 1");
    if (slow.shape()[1] != fast.shape()[1] || slow.shape()[2] != fast.shape()[2])
        throw ShapeError("PathwayFeatures: slow and fast must share H and W");
}

void ActorBox::validate() const {
    if (!(x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1 && x1 < x2 && y1 < y2))
        throw ShapeError("ActorBox: invalid coordinates");
    if (!(confidence >= 0 && confidence <= 1))
        throw ShapeError("ActorBox: confidence out of [0,1]");
}

Tensor temporal_pool(const Tensor& f, Tape* tape) {
    if (f.rank() != 4) throw ShapeError("temporal_pool: expects [T x H x W x C]");
    return reduce_mean(f, 0, tape);
}

Tensor spatial_pool(const Tensor& f, Tape* tape) {
    if (f.rank() != 4) throw ShapeError("spatial_pool: expects [T x H x W x C]");
    return reduce_mean(reduce_mean(f, 1, tape), 1, tape);
}

Tensor standardize_tokens(const Tensor& tokens) {
    if (tokens.rank() != 2) throw ShapeError("standardize_tokens: expects [n x C]");
    int64_t n = tokens.shape()[0], c = tokens.shape()[1];
    Tensor out = Tensor::zeros({n, c});
    for (int64_t ch = 0; ch < c; ++ch) {
        double mean = 0.0;
        for (int64_t t = 0; t < n; ++t) mean += tokens.data()[t * c + ch];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t t = 0; t < n; ++t) {
            double d = tokens.data()[t * c + ch] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double inv = 1.0 / std::sqrt(var + 1e-12);
        for (int64_t t = 0; t < n; ++t)
            out.data()[t * c + ch] = (tokens.data()[t * c + ch] - mean) * inv;
    }
    return out;
}

ContextMaps build_context_maps(const PathwayFeatures& pf, Tape* tape) {
    pf.validate();
    int64_t h = pf.slow.shape()[1], w = pf.slow.shape()[2];
    int64_t cs = pf.slow.shape()[3], cf = pf.fast.shape()[3];
    ContextMaps out;
    Tensor slow_pooled = temporal_pool(pf.slow, tape);  // [H x W x C_s]
    Tensor fast_pooled = temporal_pool(pf.fast, tape);  // [H x W x C_f]
    out.pooled_concat = concat({slow_pooled, fast_pooled}, 2, tape);
    out.slow_tokens = standardize_tokens(reshape(slow_pooled, {h * w, cs}, tape));
    out.fast_tokens = standardize_tokens(spatial_pool(pf.fast, tape));
    out.concat_tokens = standardize_tokens(reshape(out.pooled_concat, {h * w, cs + cf}, tape));
    return out;
}

void bilinear_sample(const Tensor& fmap, double x, double y, double* out_channels) {
    int64_t h = fmap.shape()[0], w = fmap.shape()[1], c = fmap.shape()[2];
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    int64_t x0 = static_cast<int64_t>(std::floor(x));
    int64_t y0 = static_cast<int64_t>(std::floor(y));
    int64_t x1 = std::min(x0 + 1, w - 1);
    int64_t y1 = std::min(y0 + 1, h - 1);
    double fx = x - static_cast<double>(x0);
    double fy = y - static_cast<double>(y0);
    const double* d = fmap.data().data();
    for (int64_t ch = 0; ch < c; ++ch) {
        double v00 = d[(y0 * w + x0) * c + ch];
        double v01 = d[(y0 * w + x1) * c + ch];
        double v10 = d[(y1 * w + x0) * c + ch];
        double v11 = d[(y1 * w + x1) * c + ch];
        out_channels[ch] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                           fy * ((1 - fx) * v10 + fx * v11);
    }
}

Tensor roi_align(const Tensor& fmap, const ActorBox& box, int64_t out_size) {
    if (fmap.rank() != 3) throw ShapeError("roi_align: expects [H x W x C]");
    box.validate();
    int64_t h = fmap.shape()[0], w = fmap.shape()[1], c = fmap.shape()[2];
    double x1f = box.x1 * static_cast<double>(w - 1);
    double x2f = box.x2 * static_cast<double>(w - 1);
    double y1f = box.y1 * static_cast<double>(h - 1);
    double y2f = box.y2 * static_cast<double>(h - 1);
    double bw = (x2f - x1f) / static_cast<double>(out_size);
    double bh = (y2f - y1f) / static_cast<double>(out_size);
    if (bw <= 0.0 || bh <= 0.0)
        throw ShapeError("roi_align: box maps to zero area on this feature grid");
    Tensor out = Tensor::zeros({out_size, out_size, c});
    for (int64_t i = 0; i < out_size; ++i) {
        double cy = y1f + (static_cast<double>(i) + 0.5) * bh;
        for (int64_t j = 0; j < out_size; ++j) {
            double cx = x1f + (static_cast<double>(j) + 0.5) * bw;
            bilinear_sample(fmap, cx, cy, out.data().data() + (i * out_size + j) * c);
        }
    }
    return out;
}

std::vector<ActorFeature> extract_actor_features(const Tensor& pooled_concat,
                                                 const std::vector<ActorBox>& boxes) {
    int64_t c = pooled_concat.shape()[2];
    std::vector<ActorFeature> out;
    out.reserve(boxes.size());
    for (const ActorBox& box : boxes) {
        ActorFeature f;
        f.grid = roi_align(pooled_concat, box, 7);
        f.tokens = reshape(f.grid, {49, c});
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<ActorFeature> extract_actor_features(const PathwayFeatures& pf,
                                                 const std::vector<ActorBox>& boxes) {
    return extract_actor_features(build_context_maps(pf).pooled_concat, boxes);
}

std::vector<ActorBox> filter_proposals(const std::vector<ActorBox>& boxes, double threshold,
                                       bool keep_ground_truth) {
    if (threshold < 0.0 || threshold > 1.0)
        throw ConfigError("filter_proposals: threshold must be in [0,1]");
    std::vector<ActorBox> kept;
    for (const ActorBox& b : boxes) {
        if ((keep_ground_truth && b.is_ground_truth) || b.confidence > threshold)
            kept.push_back(b);
    }
    return kept;
}

}  // namespace stcx
