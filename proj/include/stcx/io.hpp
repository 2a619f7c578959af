#pragma once

#include <string>
#include <vector>

#include "stcx/config.hpp"
#include "stcx/eval.hpp"
#include "stcx/head.hpp"
#include "stcx/world.hpp"

namespace stcx {

// Binary clip dump: magic + version + shape extents (u32 LE), frame data as
// f32 LE, then the proposal list as comma-separated text lines.
void save_clip(const SyntheticClip& clip, const std::string& path);
SyntheticClip load_clip(const std::string& path);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void write_ground_truth(const std::vector<GroundTruthRecord>& gts, const std::string& path);
std::vector<GroundTruthRecord> read_ground_truth(const std::string& path);

void write_detections(const std::vector<DetectionRecord>& dets, const std::string& path);
std::vector<DetectionRecord> read_detections(const std::string& path);

std::vector<GroundTruthRecord> dataset_ground_truth(const std::vector<SyntheticClip>& clips);

// Checkpoint: magic, version, config snapshot, step counter, then
// length-prefixed name/shape/data triples for parameters and optimizer
// velocities, little-endian, 64-bit reals.
void save_checkpoint(const std::string& path, const RunConfig& cfg, HeadParams& params,
                     const SgdOptimizer& opt, uint64_t step);

struct LoadedCheckpoint {
    RunConfig config;
    HeadParams params;
    SgdOptimizer opt;
    uint64_t step = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace stcx
