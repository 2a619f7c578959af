#include "stcx/world.hpp"

#include <algorithm>
#include <cmath>

namespace stcx {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Blob {
    double cx, cy, sigma, intensity;
};

double blob_value(const Blob& b, double x, double y) {
    double dx = x - b.cx, dy = y - b.cy;
    return b.intensity * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
}

ActorBox centered_box(double cx, double cy, double half, double confidence, bool is_gt) {
    ActorBox b;
    b.x1 = std::clamp(cx - half, 0.0, 1.0);
    b.y1 = std::clamp(cy - half, 0.0, 1.0);
    b.x2 = std::clamp(cx + half, 0.0, 1.0);
    b.y2 = std::clamp(cy + half, 0.0, 1.0);
    b.confidence = confidence;
    b.is_ground_truth = is_gt;
    return b;
}

ActorBox jitter_box(const ActorBox& src, std::mt19937_64& rng, double amount, double confidence) {
    std::uniform_real_distribution<double> d(-amount, amount);
    ActorBox b = src;
    b.x1 = std::clamp(src.x1 + d(rng), 0.0, 1.0);
    b.y1 = std::clamp(src.y1 + d(rng), 0.0, 1.0);
    b.x2 = std::clamp(src.x2 + d(rng), 0.0, 1.0);
    b.y2 = std::clamp(src.y2 + d(rng), 0.0, 1.0);
    if (b.x2 <= b.x1) b.x2 = std::min(1.0, b.x1 + 0.05);
    if (b.y2 <= b.y1) b.y2 = std::min(1.0, b.y1 + 0.05);
    b.confidence = confidence;
    b.is_ground_truth = false;
    return b;
}

}  // namespace

void WorldConfig::validate() const {
    if (t_raw < 2 || img_size < 4 || feat_size < 1 || c_slow < 1 || c_fast < 1 ||
        num_classes < 1 || slow_stride < 1 || fast_stride < 1)
        throw ConfigError("WorldConfig: all extents must be positive");
    if (img_size % feat_size != 0)
        throw ConfigError("WorldConfig: img_size must be divisible by feat_size");
    if (t_raw % slow_stride != 0 || t_raw % fast_stride != 0)
        throw ConfigError("WorldConfig: t_raw must be divisible by both strides");
    if (t_raw / fast_stride <= t_raw / slow_stride)
        throw ConfigError("WorldConfig: fast pathway must have more frames than slow");
    if (t_raw % 2 != 0) throw ConfigError("WorldConfig: t_raw must be even");
}

SyntheticClip generate_clip(uint64_t seed, bool give, const WorldConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // Scene layout; identical draws for both directions of the same seed.
    double ax = 0.18 + 0.12 * u01(rng);
    double ay = 0.35 + 0.30 * u01(rng);
    double bx = 0.70 + 0.12 * u01(rng);
    double by = 0.35 + 0.30 * u01(rng);
    bool a_bright = u01(rng) < 0.5;
    bool b_bright = u01(rng) < 0.5;
    bool horizontal = u01(rng) < 0.5;
    double phase = 2.0 * M_PI * u01(rng);

    double ia = a_bright ? 0.9 : 0.5;
    double ib = b_bright ? 0.9 : 0.5;
    double mx = 0.5 * (ax + bx), my = 0.5 * (ay + by);

    SyntheticClip clip;
    clip.seed = seed;
    clip.give = give;
    int64_t t_raw = cfg.t_raw, img = cfg.img_size;
    clip.frames = Tensor::zeros({t_raw, img, img, 1});

    int64_t half_span = t_raw / 2 - 1;  // trajectory plateaus at the two center frames
    double dir = give ? 1.0 : -1.0;
    for (int64_t t = 0; t < t_raw; ++t) {
        int64_t s = t <= t_raw / 2 - 1 ? t - (t_raw / 2 - 1) : t - t_raw / 2;
        double frac = dir * static_cast<double>(s) / static_cast<double>(half_span);
        Blob obj{mx + frac * (bx - mx), my + frac * (by - my), 0.025, 1.0};
        Blob actor_a{ax, ay, 0.06, ia};
        Blob actor_b{bx, by, 0.06, ib};
        double* frame = clip.frames.data().data() + t * img * img;
        for (int64_t py = 0; py < img; ++py) {
            double y = (static_cast<double>(py) + 0.5) / static_cast<double>(img);
            for (int64_t px = 0; px < img; ++px) {
                double x = (static_cast<double>(px) + 0.5) / static_cast<double>(img);
                double bg = 0.08 * 0.5 *
                            (1.0 + std::sin(2.0 * M_PI * 3.0 * (horizontal ? y : x) + phase));
                double v = bg + blob_value(actor_a, x, y) + blob_value(actor_b, x, y) +
                           blob_value(obj, x, y);
                frame[py * img + px] = std::min(1.0, v);
            }
        }
    }

    clip.gt_boxes.push_back(centered_box(ax, ay, 0.14, 1.0, true));
    clip.gt_boxes.push_back(centered_box(bx, by, 0.14, 1.0, true));
    clip.gt_labels.push_back({give ? kClassGive : kClassReceive,
                              a_bright ? kClassBrightActor : kClassDimActor,
                              horizontal ? kClassHorizontalScene : kClassVerticalScene});
    clip.gt_labels.push_back({give ? kClassReceive : kClassGive,
                              b_bright ? kClassBrightActor : kClassDimActor,
                              horizontal ? kClassHorizontalScene : kClassVerticalScene});

    // Proposals: GT boxes themselves, high-confidence jittered copies, plus
    // low-confidence distractors that the 0.8 threshold must drop.
    std::uniform_real_distribution<double> high_conf(0.85, 0.99);
    std::uniform_real_distribution<double> low_conf(0.30, 0.75);
    for (const ActorBox& gt : clip.gt_boxes) {
        clip.proposals.push_back(gt);
        clip.proposals.push_back(jitter_box(gt, rng, 0.02, high_conf(rng)));
    }
    for (int i = 0; i < 2; ++i) {
        double cx = 0.2 + 0.6 * u01(rng);
        double cy = 0.2 + 0.6 * u01(rng);
        double half = 0.08 + 0.08 * u01(rng);
        clip.proposals.push_back(centered_box(cx, cy, half, low_conf(rng), false));
    }
    return clip;
}

BackboneStubParams BackboneStubParams::init(const WorldConfig& cfg, uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    int64_t cells = cfg.feat_size * cfg.feat_size;
    int64_t pix = cfg.patch() * cfg.patch();
    double std_dev = 1.0 / std::sqrt(static_cast<double>(pix));
    std::normal_distribution<double> dist(0.0, std_dev);
    BackboneStubParams p;
    p.slow_stride = static_cast<int>(cfg.slow_stride);
    p.fast_stride = static_cast<int>(cfg.fast_stride);
    auto fill = [&](int64_t channels) {
        Tensor t = Tensor::zeros({cells, pix, channels});
        for (auto& v : t.data()) v = dist(rng);
        return t;
    };
    p.slow_proj = fill(cfg.c_slow);
    p.fast_proj = fill(cfg.c_fast);
    return p;
}

namespace {

// Projects window-averaged frames through per-cell patch projections.
Tensor project_pathway(const Tensor& frames, const Tensor& proj, int64_t stride,
                       const WorldConfig& cfg) {
    int64_t t_raw = frames.shape()[0], img = cfg.img_size;
    int64_t t_out = t_raw / stride;
    int64_t grid = cfg.feat_size, p = cfg.patch();
    int64_t pix = p * p, channels = proj.shape()[2];
    Tensor out = Tensor::zeros({t_out, grid, grid, channels});
    std::vector<double> window(img * img);
    std::vector<double> patch(pix);
    for (int64_t k = 0; k < t_out; ++k) {
        std::fill(window.begin(), window.end(), 0.0);
        for (int64_t t = k * stride; t < (k + 1) * stride; ++t) {
            const double* frame = frames.data().data() + t * img * img;
            for (int64_t i = 0; i < img * img; ++i) window[i] += frame[i];
        }
        for (double& v : window) v /= static_cast<double>(stride);
        for (int64_t gi = 0; gi < grid; ++gi) {
            for (int64_t gj = 0; gj < grid; ++gj) {
                for (int64_t pi = 0; pi < p; ++pi)
                    for (int64_t pj = 0; pj < p; ++pj)
                        patch[pi * p + pj] = window[(gi * p + pi) * img + gj * p + pj];
                const double* w = proj.data().data() + (gi * grid + gj) * pix * channels;
                double* dst = out.data().data() + ((k * grid + gi) * grid + gj) * channels;
                for (int64_t q = 0; q < pix; ++q) {
                    double pv = patch[q];
                    if (pv == 0.0) continue;
                    for (int64_t ch = 0; ch < channels; ++ch) dst[ch] += pv * w[q * channels + ch];
                }
            }
        }
    }
    return out;
}

}  // namespace

PathwayFeatures backbone_stub(const SyntheticClip& clip, const BackboneStubParams& p,
                              const WorldConfig& cfg) {
    cfg.validate();
    if (clip.frames.rank() != 4 || clip.frames.shape()[0] != cfg.t_raw ||
        clip.frames.shape()[1] != cfg.img_size || clip.frames.shape()[2] != cfg.img_size)
        throw ConfigError("backbone_stub: clip frames incompatible with world config");
    PathwayFeatures pf;
    pf.slow = project_pathway(clip.frames, p.slow_proj, p.slow_stride, cfg);
    pf.fast = project_pathway(clip.frames, p.fast_proj, p.fast_stride, cfg);
    pf.validate();
    return pf;
}

Dataset make_dataset(int64_t num_clips, uint64_t seed, double train_ratio,
                     const WorldConfig& cfg) {
    if (num_clips < 0) throw ConfigError("make_dataset: negative clip count");
    if (train_ratio <= 0.0 || train_ratio >= 1.0)
        throw ConfigError("make_dataset: train_ratio must lie strictly between 0 and 1");
    int64_t num_train = std::llround(static_cast<double>(num_clips) * train_ratio);
    Dataset ds;
    for (int64_t i = 0; i < num_clips; ++i) {
        bool in_train = i < num_train;
        int64_t within = in_train ? i : i - num_train;
        bool give = within % 2 == 0;  // round-robin per split keeps classes balanced
        SyntheticClip clip = generate_clip(splitmix64(seed + static_cast<uint64_t>(i)), give, cfg);
        clip.clip_id = i;
        (in_train ? ds.train : ds.val).push_back(std::move(clip));
    }
    return ds;
}

}  // namespace stcx
