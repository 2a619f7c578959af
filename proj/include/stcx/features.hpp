#pragma once

#include <vector>

#include "stcx/tensor.hpp"

namespace stcx {

// Slow/fast backbone feature maps, both [T x H x W x C].
struct PathwayFeatures {
    Tensor slow;  // [T_s x H x W x C_s]
    Tensor fast;  // [T_f x H x W x C_f]

    void validate() const;
};

// Normalized-coordinate bounding box with detector confidence.
struct ActorBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double confidence = 1.0;
    bool is_ground_truth = false;

    void validate() const;
};

// One actor's RoIAligned feature grid plus its token view.
struct ActorFeature {
    Tensor grid;    // [7 x 7 x C]
    Tensor tokens;  // [49 x C]
};

// Attention-ready context token sets derived from the two pathways. The
// token sets are standardized per channel across tokens (frozen backbone
// output, treated as constant inputs by autodiff); pooled_concat stays raw
// so RoIAlign keeps absolute feature values.
struct ContextMaps {
    Tensor pooled_concat;  // [H x W x C], C = C_s + C_f, for RoIAlign
    Tensor slow_tokens;    // [(H*W) x C_s], temporally pooled slow map, flattened
    Tensor fast_tokens;    // [T_f x C_f], spatially pooled fast map
    Tensor concat_tokens;  // [(H*W) x C], flattened pooled_concat (spatial-context ablation)
};

// Mean over the leading time axis of [T x H x W x C] -> [H x W x C].
Tensor temporal_pool(const Tensor& f, Tape* tape = nullptr);

// Mean over both spatial axes of [T x H x W x C] -> [T x C].
Tensor spatial_pool(const Tensor& f, Tape* tape = nullptr);

// Per-channel standardization across token positions of [n x C]; constant
// channels map to zero. Not recorded on the tape.
Tensor standardize_tokens(const Tensor& tokens);

ContextMaps build_context_maps(const PathwayFeatures& pf, Tape* tape = nullptr);

// Samples one bilinear point per output bin (the bin center); box coordinates
// are scaled by (W-1, H-1) into continuous feature coordinates and samples
// clamp at the border.
Tensor roi_align(const Tensor& fmap, const ActorBox& box, int64_t out_size = 7);

// Plain bilinear sample of fmap [H x W x C] at continuous (x, y), clamped.
void bilinear_sample(const Tensor& fmap, double x, double y, double* out_channels);

std::vector<ActorFeature> extract_actor_features(const PathwayFeatures& pf,
                                                 const std::vector<ActorBox>& boxes);
std::vector<ActorFeature> extract_actor_features(const Tensor& pooled_concat,
                                                 const std::vector<ActorBox>& boxes);

// Keeps boxes with confidence strictly above threshold; ground-truth-flagged
// boxes are always kept when keep_ground_truth is set (training mode).
std::vector<ActorBox> filter_proposals(const std::vector<ActorBox>& boxes, double threshold,
                                       bool keep_ground_truth = true);

}  // namespace stcx
