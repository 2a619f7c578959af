#pragma once

#include <cstdint>
#include <string>

#include "stcx/head.hpp"
#include "stcx/world.hpp"

namespace stcx {

// Flat key=value run configuration (# starts a comment).
struct RunConfig {
    uint64_t seed = 7;

    // dataset
    int64_t num_clips = 125;
    double train_ratio = 0.8;
    int64_t img_size = 32;
    int64_t feat_size = 8;
    int64_t t_raw = 16;
    int64_t c_slow = 16;
    int64_t c_fast = 4;
    int64_t num_classes = 6;
    int64_t slow_stride = 8;
    int64_t fast_stride = 2;

    // head
    int64_t num_heads = 4;
    int64_t ffn_hidden = 0;  // 0 -> 2 * model_dim
    std::string variant = "spatiotemporal_ctx+spatial_actors";
    bool actor_pos_embedding = true;
    bool context_pos_embedding = true;

    // optimizer
    double lr = 3e-2;
    double momentum = 0.9;
    int64_t steps = 500;
    int64_t batch_size = 8;

    // evaluation
    double confidence_threshold = 0.8;
    double iou_threshold = 0.5;

    // harness
    int64_t log_every = 50;
    int64_t val_every = 0;  // 0 disables periodic validation
    std::string data_dir = "data";
    std::string checkpoint_path = "checkpoint.bin";
    std::string report_path = "report.txt";

    WorldConfig world() const;
    HeadConfig head() const;
    void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace stcx
