#pragma once

#include <string>
#include <vector>

#include "stcx/features.hpp"

namespace stcx {

struct DetectionRecord {
    int64_t clip_id = 0;
    ActorBox box;
    int class_id = 0;
    double score = 0.0;
};

struct GroundTruthRecord {
    int64_t clip_id = 0;
    ActorBox box;
    int class_id = 0;
};

struct EvalResult {
    std::vector<double> per_class_ap;  // indexed by class id
    std::vector<int64_t> gt_counts;    // ground-truth totals per class
    double mean_ap = 0.0;              // over classes with >= 1 ground truth

    std::string report() const;  // stable text report, mAP as percentage
};

double iou(const ActorBox& a, const ActorBox& b);

// Greedy matching in descending score order (stable on ties), each ground
// truth matchable once, match requires same clip and IoU >= threshold.
// AP is the area under the all-point-interpolated precision/recall curve.
double average_precision(std::vector<DetectionRecord> dets,
                         const std::vector<GroundTruthRecord>& gts, double iou_thresh = 0.5);

EvalResult evaluate(const std::vector<DetectionRecord>& dets,
                    const std::vector<GroundTruthRecord>& gts, int num_classes,
                    double iou_thresh = 0.5);

}  // namespace stcx
