#include "stcx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace stcx {

double iou(const ActorBox& a, const ActorBox& b) {
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
    double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
    double uni = area_a + area_b - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double average_precision(std::vector<DetectionRecord> dets,
                         const std::vector<GroundTruthRecord>& gts, double iou_thresh) {
    if (gts.empty()) throw ConfigError("average_precision: no ground truths for class");
    std::stable_sort(dets.begin(), dets.end(),
                     [](const DetectionRecord& a, const DetectionRecord& b) {
                         return a.score > b.score;
                     });
    std::vector<bool> matched(gts.size(), false);
    std::vector<bool> tp(dets.size(), false);
    for (size_t d = 0; d < dets.size(); ++d) {
        double best_iou = 0.0;
        int64_t best_gt = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (matched[g] || gts[g].clip_id != dets[d].clip_id) continue;
            double v = iou(dets[d].box, gts[g].box);
            if (v >= iou_thresh && v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int64_t>(g);
            }
        }
        if (best_gt >= 0) {
            matched[best_gt] = true;
            tp[d] = true;
        }
    }

    size_t n = dets.size();
    std::vector<double> precision(n), recall(n);
    double num_gt = static_cast<double>(gts.size());
    int64_t cum_tp = 0;
    for (size_t d = 0; d < n; ++d) {
        cum_tp += tp[d] ? 1 : 0;
        precision[d] = static_cast<double>(cum_tp) / static_cast<double>(d + 1);
        recall[d] = static_cast<double>(cum_tp) / num_gt;
    }
    // Monotone non-increasing precision envelope, then all-point area.
    for (int64_t d = static_cast<int64_t>(n) - 2; d >= 0; --d)
        precision[d] = std::max(precision[d], precision[d + 1]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t d = 0; d < n; ++d) {
        ap += (recall[d] - prev_recall) * precision[d];
        prev_recall = recall[d];
    }
    return ap;
}

EvalResult evaluate(const std::vector<DetectionRecord>& dets,
                    const std::vector<GroundTruthRecord>& gts, int num_classes,
                    double iou_thresh) {
    if (num_classes < 1) throw ConfigError("evaluate: need at least one class");
    EvalResult result;
    result.per_class_ap.assign(num_classes, 0.0);
    result.gt_counts.assign(num_classes, 0);
    for (const auto& g : gts) {
        if (g.class_id < 0 || g.class_id >= num_classes)
            throw ConfigError("evaluate: ground-truth class id out of range");
        ++result.gt_counts[g.class_id];
    }
    double sum = 0.0;
    int64_t eligible = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (result.gt_counts[c] == 0) continue;  // excluded from the mean
        std::vector<DetectionRecord> class_dets;
        std::vector<GroundTruthRecord> class_gts;
        for (const auto& d : dets)
            if (d.class_id == c) class_dets.push_back(d);
        for (const auto& g : gts)
            if (g.class_id == c) class_gts.push_back(g);
        double ap = average_precision(std::move(class_dets), class_gts, iou_thresh);
        result.per_class_ap[c] = ap;
        sum += ap;
        ++eligible;
    }
    if (eligible == 0) throw ConfigError("evaluate: no class has any ground truth");
    result.mean_ap = sum / static_cast<double>(eligible);
    return result;
}

std::string EvalResult::report() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "class  gt_count  AP\n";
    for (size_t c = 0; c < per_class_ap.size(); ++c) {
        os << c << "  " << gt_counts[c] << "  ";
        if (gt_counts[c] == 0)
            os << "excluded\n";
        else
            os << 100.0 * per_class_ap[c] << "\n";
    }
    os << "mAP  " << 100.0 * mean_ap << "\n";
    return os.str();
}

}  // namespace stcx
