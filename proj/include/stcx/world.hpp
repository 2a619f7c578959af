#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcx/features.hpp"

namespace stcx {

// Class vocabulary of the synthetic task. Classes 0/1 depend on temporal
// order; 2..5 are decidable from the center frame alone.
enum SyntheticClass : int {
    kClassGive = 0,
    kClassReceive = 1,
    kClassBrightActor = 2,
    kClassDimActor = 3,
    kClassHorizontalScene = 4,
    kClassVerticalScene = 5,
};

struct WorldConfig {
    int64_t t_raw = 16;
    int64_t img_size = 32;
    int64_t feat_size = 8;  // backbone spatial grid H = W
    int64_t c_slow = 16;
    int64_t c_fast = 4;
    int64_t num_classes = 6;
    int64_t slow_stride = 8;
    int64_t fast_stride = 2;

    int64_t patch() const { return img_size / feat_size; }
    void validate() const;
};

struct SyntheticClip {
    int64_t clip_id = 0;
    uint64_t seed = 0;
    bool give = true;
    Tensor frames;  // [T_raw x img x img x 1], values in [0,1]
    std::vector<ActorBox> gt_boxes;
    std::vector<std::vector<int>> gt_labels;  // class ids per ground-truth actor
    std::vector<ActorBox> proposals;          // includes GT-flagged boxes
};

// Renders two static actor blobs and one object blob translating between
// them. The trajectory is time-antisymmetric: a receive clip with the same
// seed is the exact frame-reversal of its give counterpart, and the center
// frame (and its twin at t = T/2 - 1) is shared bit-exactly by both.
SyntheticClip generate_clip(uint64_t seed, bool give, const WorldConfig& cfg);

// Frozen per-cell random patch projections; never trained.
struct BackboneStubParams {
    Tensor slow_proj;  // [feat*feat x patch*patch x C_s]
    Tensor fast_proj;  // [feat*feat x patch*patch x C_f]
    int64_t slow_stride = 8;
    int64_t fast_stride = 2;

    static BackboneStubParams init(const WorldConfig& cfg, uint64_t seed);
};

// Each output frame is the mean of one stride window of input frames, then
// patches are projected per grid cell. Window averaging keeps the map
// equivariant to time reversal: reversing the clip reverses F_f.
PathwayFeatures backbone_stub(const SyntheticClip& clip, const BackboneStubParams& p,
                              const WorldConfig& cfg);

struct Dataset {
    std::vector<SyntheticClip> train;
    std::vector<SyntheticClip> val;
};

Dataset make_dataset(int64_t num_clips, uint64_t seed, double train_ratio,
                     const WorldConfig& cfg);

}  // namespace stcx
