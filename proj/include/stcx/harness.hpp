#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stcx/config.hpp"
#include "stcx/eval.hpp"
#include "stcx/io.hpp"

namespace stcx {

uint64_t derive_seed(uint64_t seed, uint64_t stream);

// One clip prepared for the head: frozen backbone features turned into
// context tokens, actor features, and a multi-hot label matrix.
struct ClipExample {
    int64_t clip_id = 0;
    ContextMaps ctx;
    std::vector<ActorFeature> actors;
    std::vector<ActorBox> boxes;
    Tensor labels;  // [N x num_classes], empty actors -> undefined
};

ClipExample prepare_clip(const SyntheticClip& clip, const BackboneStubParams& stub,
                         const RunConfig& cfg, bool training);

struct TrainLogEntry {
    int64_t step = 0;
    double loss = 0.0;
    std::optional<double> val_map;
};

struct TrainResult {
    HeadParams params;
    SgdOptimizer opt;
    uint64_t steps = 0;
    std::vector<TrainLogEntry> log;
};

TrainResult train_head(const RunConfig& cfg, const Dataset& ds);

EvalResult eval_head(const RunConfig& cfg, HeadParams& params,
                     const std::vector<SyntheticClip>& val_clips,
                     std::vector<DetectionRecord>* out_dets = nullptr);

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Finite-difference checks for every registered operation plus every
// parameter tensor of a small head instance.
std::vector<GradCheckEntry> gradcheck_suite(uint64_t seed);
std::string gradcheck_report(const std::vector<GradCheckEntry>& entries);

struct AblateRow {
    AblationVariant variant;
    std::vector<double> overall_map;    // per seed
    std::vector<double> direction_map;  // per seed, classes give/receive only
    double mean_overall = 0.0;
    double mean_direction = 0.0;
};

struct AblateReport {
    std::vector<AblateRow> rows;
    std::string text() const;
};

AblateReport run_ablation(const RunConfig& base, const std::vector<uint64_t>& seeds);

// Mean AP over the two direction classes.
double direction_map(const EvalResult& r);

// CLI entry points. Throw ConfigError / NumericError / IoError on failure.
void cmd_generate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
EvalResult cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path);
void cmd_ablate(const RunConfig& cfg);
bool cmd_gradcheck(const RunConfig& cfg);  // true if all checks pass

}  // namespace stcx
