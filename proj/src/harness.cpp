#include "stcx/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace stcx {

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {
constexpr uint64_t kBackboneStream = 1;
constexpr uint64_t kParamStream = 2;
constexpr uint64_t kShuffleStream = 3;
}  // namespace

ClipExample prepare_clip(const SyntheticClip& clip, const BackboneStubParams& stub,
                         const RunConfig& cfg, bool training) {
    ClipExample ex;
    ex.clip_id = clip.clip_id;
    PathwayFeatures pf = backbone_stub(clip, stub, cfg.world());
    ex.ctx = build_context_maps(pf);

    std::vector<ActorBox> candidates;
    if (training) {
        candidates = filter_proposals(clip.proposals, cfg.confidence_threshold, true);
    } else {
        std::vector<ActorBox> non_gt;
        for (const ActorBox& b : clip.proposals)
            if (!b.is_ground_truth) non_gt.push_back(b);
        candidates = filter_proposals(non_gt, cfg.confidence_threshold, false);
    }

    std::vector<std::vector<int>> labels;
    for (const ActorBox& b : candidates) {
        if (training) {
            // Assign the labels of the best-overlapping ground-truth actor.
            double best = 0.0;
            int64_t best_gt = -1;
            for (size_t g = 0; g < clip.gt_boxes.size(); ++g) {
                double v = iou(b, clip.gt_boxes[g]);
                if (v >= cfg.iou_threshold && v > best) {
                    best = v;
                    best_gt = static_cast<int64_t>(g);
                }
            }
            if (best_gt < 0) continue;
            labels.push_back(clip.gt_labels[best_gt]);
        }
        ex.boxes.push_back(b);
    }
    ex.actors = extract_actor_features(ex.ctx.pooled_concat, ex.boxes);
    if (training && !ex.boxes.empty()) {
        int64_t n = static_cast<int64_t>(ex.boxes.size());
        ex.labels = Tensor::zeros({n, cfg.num_classes});
        for (int64_t a = 0; a < n; ++a)
            for (int cls : labels[a]) ex.labels.data()[a * cfg.num_classes + cls] = 1.0;
    }
    return ex;
}

EvalResult eval_head(const RunConfig& cfg, HeadParams& params,
                     const std::vector<SyntheticClip>& val_clips,
                     std::vector<DetectionRecord>* out_dets) {
    BackboneStubParams stub =
        BackboneStubParams::init(cfg.world(), derive_seed(cfg.seed, kBackboneStream));
    std::vector<DetectionRecord> dets;
    for (const SyntheticClip& clip : val_clips) {
        ClipExample ex = prepare_clip(clip, stub, cfg, false);
        if (ex.actors.empty()) continue;
        HeadOutput out = head_forward(ex.actors, ex.ctx, params, nullptr);
        for (size_t a = 0; a < ex.actors.size(); ++a) {
            for (int64_t cls = 0; cls < cfg.num_classes; ++cls) {
                DetectionRecord r;
                r.clip_id = clip.clip_id;
                r.box = ex.boxes[a];
                r.class_id = static_cast<int>(cls);
                r.score = out.scores.data()[a * cfg.num_classes + cls];
                dets.push_back(r);
            }
        }
    }
    if (out_dets) *out_dets = dets;
    return evaluate(dets, dataset_ground_truth(val_clips), static_cast<int>(cfg.num_classes),
                    cfg.iou_threshold);
}

TrainResult train_head(const RunConfig& cfg, const Dataset& ds) {
    cfg.validate();
    BackboneStubParams stub =
        BackboneStubParams::init(cfg.world(), derive_seed(cfg.seed, kBackboneStream));

    std::vector<ClipExample> examples;
    for (const SyntheticClip& clip : ds.train) {
        ClipExample ex = prepare_clip(clip, stub, cfg, true);
        if (!ex.actors.empty()) examples.push_back(std::move(ex));
    }
    if (examples.empty() && cfg.steps > 0)
        throw ConfigError("train: no usable training clips in dataset");

    TrainResult result;
    result.params = HeadParams::init(cfg.head(), derive_seed(cfg.seed, kParamStream));
    result.opt.lr = cfg.lr;
    result.opt.momentum = cfg.momentum;

    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
    std::vector<size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    size_t cursor = 0;

    for (int64_t step = 0; step < cfg.steps; ++step) {
        result.params.visit([](const std::string&, Tensor& t) { t.zero_grad(); });
        Tape tape;
        Tensor batch_loss;
        int64_t batch = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(examples.size()));
        for (int64_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), shuffle_rng);
                cursor = 0;
            }
            ClipExample& ex = examples[order[cursor++]];
            HeadOutput out = head_forward(ex.actors, ex.ctx, result.params, &tape);
            Tensor loss = bce_loss(out.logits, ex.labels, &tape);
            batch_loss = batch_loss.defined() ? add(batch_loss, loss, &tape) : loss;
        }
        batch_loss = scale(batch_loss, 1.0 / static_cast<double>(batch), &tape);
        double loss_value = batch_loss.value();
        if (!std::isfinite(loss_value))
            throw NumericError("training diverged: non-finite loss at step " +
                               std::to_string(step));
        tape.backward(batch_loss);
        result.opt.step(result.params);
        ++result.steps;

        bool log_now = cfg.log_every > 0 && (step + 1) % cfg.log_every == 0;
        bool val_now = cfg.val_every > 0 && (step + 1) % cfg.val_every == 0 && !ds.val.empty();
        if (log_now || val_now || step + 1 == cfg.steps) {
            TrainLogEntry entry;
            entry.step = step + 1;
            entry.loss = loss_value;
            if (val_now) entry.val_map = eval_head(cfg, result.params, ds.val).mean_ap;
            result.log.push_back(entry);
        }
    }
    return result;
}

double direction_map(const EvalResult& r) {
    double sum = 0.0;
    int64_t n = 0;
    for (int cls : {kClassGive, kClassReceive}) {
        if (cls < static_cast<int>(r.gt_counts.size()) && r.gt_counts[cls] > 0) {
            sum += r.per_class_ap[cls];
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

AblateReport run_ablation(const RunConfig& base, const std::vector<uint64_t>& seeds) {
    AblateReport report;
    for (AblationVariant variant : all_variants()) {
        AblateRow row;
        row.variant = variant;
        for (uint64_t seed : seeds) {
            RunConfig cfg = base;
            cfg.seed = seed;
            cfg.variant = variant_name(variant);
            Dataset ds = make_dataset(cfg.num_clips, seed, cfg.train_ratio, cfg.world());
            TrainResult tr = train_head(cfg, ds);
            EvalResult er = eval_head(cfg, tr.params, ds.val);
            row.overall_map.push_back(er.mean_ap);
            row.direction_map.push_back(direction_map(er));
        }
        auto mean = [](const std::vector<double>& v) {
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        row.mean_overall = mean(row.overall_map);
        row.mean_direction = mean(row.direction_map);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string AblateReport::text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "variant | per-seed mAP | mean mAP | per-seed direction mAP | mean direction mAP\n";
    for (const AblateRow& row : rows) {
        os << variant_name(row.variant) << " |";
        for (double v : row.overall_map) os << " " << 100.0 * v;
        os << " | " << 100.0 * row.mean_overall << " |";
        for (double v : row.direction_map) os << " " << 100.0 * v;
        os << " | " << 100.0 * row.mean_direction << "\n";
    }
    os << "\nfull-scale reference mAP for these five rows: "
          "24.80 / 26.50 / 26.75 / 26.65 / 27.02\n";
    return os.str();
}

// --- gradient-check suite ---

namespace {

struct Suite {
    std::mt19937_64 rng;
    std::vector<GradCheckEntry> entries;

    explicit Suite(uint64_t seed) : rng(seed) {}

    Tensor rand(Shape shape, bool rg = false) {
        return Tensor::uniform(std::move(shape), -1.0, 1.0, rng, rg);
    }

    void check(const std::string& name, double tol,
               const std::function<Tensor(Tape&)>& f, std::vector<Tensor*> wrt) {
        double worst = 0.0;
        for (Tensor* t : wrt) worst = std::max(worst, grad_check(f, *t));
        entries.push_back({name, worst, tol, worst < tol});
    }
};

constexpr double kLinearTol = 1e-8;
constexpr double kNonlinearTol = 1e-4;

void add_op_checks(Suite& s) {
    {
        Tensor a = s.rand({3, 4}, true), b = s.rand({4, 2}, true), w = s.rand({3, 2});
        s.check("matmul", kLinearTol,
                [=](Tape& t) { return mean_all(mul(matmul(a, b, &t), w, &t), &t); }, {&a, &b});
    }
    {
        Tensor a = s.rand({3, 4}, true), b = s.rand({3, 4}, true), w = s.rand({3, 4});
        s.check("add", kLinearTol,
                [=](Tape& t) { return mean_all(mul(add(a, b, &t), w, &t), &t); }, {&a, &b});
        s.check("mul", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(mul(a, b, &t), w, &t), &t); }, {&a, &b});
    }
    {
        Tensor x = s.rand({4, 5}, true), w = s.rand({4, 5});
        s.check("softmax", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(softmax(x, 1, &t), w, &t), &t); }, {&x});
        s.check("gelu", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(gelu(x, &t), w, &t), &t); }, {&x});
        s.check("sigmoid", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(sigmoid(x, &t), w, &t), &t); }, {&x});
        s.check("exp", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(exp_op(x, &t), w, &t), &t); }, {&x});
        s.check("relu", kNonlinearTol,
                [=](Tape& t) { return mean_all(mul(relu(x, &t), w, &t), &t); }, {&x});
        s.check("reshape_permute", kLinearTol,
                [=](Tape& t) {
                    Tensor y = permute(reshape(x, {5, 4}, &t), {1, 0}, &t);
                    return mean_all(mul(y, reshape(w, {4, 5}, &t), &t), &t);
                },
                {&x});
    }
    {
        Tensor x = s.rand({2, 3, 4}, true);
        for (int64_t axis = 0; axis < 3; ++axis) {
            Shape ws;
            for (int64_t i = 0; i < 3; ++i)
                if (i != axis) ws.push_back(x.shape()[i]);
            Tensor w = s.rand(ws);
            s.check("reduce_mean_axis" + std::to_string(axis), kLinearTol,
                    [=](Tape& t) { return mean_all(mul(reduce_mean(x, axis, &t), w, &t), &t); },
                    {&x});
            s.check("reduce_max_axis" + std::to_string(axis), kLinearTol,
                    [=](Tape& t) { return mean_all(mul(reduce_max(x, axis, &t), w, &t), &t); },
                    {&x});
        }
    }
    {
        Tensor a = s.rand({2, 3}, true), b = s.rand({4, 3}, true), w = s.rand({6, 3});
        s.check("concat_slice", kLinearTol,
                [=](Tape& t) {
                    Tensor y = concat({a, b}, 0, &t);
                    return mean_all(mul(slice(y, 0, 0, 6, &t), w, &t), &t);
                },
                {&a, &b});
    }
    {
        Tensor x = s.rand({3, 4}, true), w = s.rand({3, 2});
        std::mt19937_64 rng2(s.rng());
        LinearParams lp = LinearParams::init(4, 2, rng2);
        s.check("linear", kLinearTol,
                [=](Tape& t) { return mean_all(mul(linear(x, lp, &t), w, &t), &t); },
                {&x, &lp.weight, &lp.bias});
    }
    {
        Tensor x = s.rand({4, 6}, true), w = s.rand({4, 6});
        LayerNormParams ln = LayerNormParams::init(6);
        s.check("layer_norm", kNonlinearTol,
                [=](Tape& t) {
                    return mean_all(mul(layer_norm(x, ln.scale, ln.shift, 1e-5, &t), w, &t), &t);
                },
                {&x, &ln.scale, &ln.shift});
    }
    {
        Tensor f4 = s.rand({2, 3, 3, 2}, true);
        Tensor wt = s.rand({3, 3, 2}, false), ws = s.rand({2, 2}, false);
        s.check("temporal_pool", kLinearTol,
                [=](Tape& t) { return mean_all(mul(temporal_pool(f4, &t), wt, &t), &t); }, {&f4});
        s.check("spatial_pool", kLinearTol,
                [=](Tape& t) { return mean_all(mul(spatial_pool(f4, &t), ws, &t), &t); }, {&f4});
    }
    {
        Tensor tokens = s.rand({5, 3}, true), w = s.rand({3});
        s.check("global_max_pool", kLinearTol,
                [=](Tape& t) { return mean_all(mul(global_max_pool(tokens, &t), w, &t), &t); },
                {&tokens});
    }
    {
        std::mt19937_64 rng2(s.rng());
        auto mha = MultiHeadAttentionParams::init(8, 2, rng2);
        Tensor q = s.rand({3, 8}, true), ctx = s.rand({4, 8}, true), w = s.rand({3, 8});
        std::vector<Tensor*> wrt = {&q, &ctx};
        mha.visit("", [&](const std::string&, Tensor& t) { wrt.push_back(&t); });
        s.check("multi_head_attention", kNonlinearTol,
                [=](Tape& t) {
                    return mean_all(mul(multi_head_cross_attention(q, ctx, mha, &t), w, &t), &t);
                },
                wrt);
    }
    {
        std::mt19937_64 rng2(s.rng());
        auto block = CrossAttentionBlockParams::init(8, 2, 16, rng2);
        Tensor q = s.rand({3, 8}, true), ctx = s.rand({4, 8}, true), w = s.rand({3, 8});
        std::vector<Tensor*> wrt = {&q, &ctx};
        block.visit("", [&](const std::string&, Tensor& t) { wrt.push_back(&t); });
        s.check("cross_attention_block", kNonlinearTol,
                [=](Tape& t) {
                    return mean_all(mul(cross_attention_block(q, ctx, block, &t), w, &t), &t);
                },
                wrt);
    }
    {
        Tensor logits = s.rand({2, 3}, true);
        Tensor labels = Tensor({2, 3}, {1, 0, 1, 0, 1, 0});
        s.check("bce_loss", kNonlinearTol,
                [=](Tape& t) { return bce_loss(logits, labels, &t); }, {&logits});
    }
}

void add_head_checks(Suite& s) {
    HeadConfig hc;
    hc.slow_channels = 6;
    hc.fast_channels = 2;
    hc.num_heads = 2;
    hc.num_classes = 5;
    hc.spatial_tokens = 9;
    hc.temporal_tokens = 4;
    hc.actor_pos_embedding = true;
    hc.context_pos_embedding = true;
    hc.variant = AblationVariant::spatiotemporal_ctx_spatial_actors;
    auto params = std::make_shared<HeadParams>(HeadParams::init(hc, s.rng()));

    ContextMaps ctx;
    ctx.slow_tokens = s.rand({9, 6});
    ctx.fast_tokens = s.rand({4, 2});
    ctx.concat_tokens = s.rand({9, 8});
    Tensor actor_tokens = s.rand({49, 8}, true);
    auto actors = std::make_shared<std::vector<ActorFeature>>();
    actors->push_back({reshape(actor_tokens, {7, 7, 8}), actor_tokens});
    std::mt19937_64 label_rng(s.rng());
    std::bernoulli_distribution flip(0.5);
    Tensor labels = Tensor::zeros({1, 5});
    for (auto& v : labels.data()) v = flip(label_rng) ? 1.0 : 0.0;

    auto f = [params, actors, ctx, labels](Tape& t) {
        HeadOutput out = head_forward(*actors, ctx, *params, &t);
        return bce_loss(out.logits, labels, &t);
    };
    s.check("head/actor_tokens", kNonlinearTol, f, {&actor_tokens});
    params->visit([&](const std::string& name, Tensor& t) {
        s.check("head/" + name, kNonlinearTol, f, {&t});
    });
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_suite(uint64_t seed) {
    Suite s(derive_seed(seed, 11));
    add_op_checks(s);
    add_head_checks(s);
    return s.entries;
}

std::string gradcheck_report(const std::vector<GradCheckEntry>& entries) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(3);
    for (const auto& e : entries) {
        os << (e.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(44) << e.name
           << "  max_rel_err=" << e.max_rel_err << "  tol=" << e.tolerance << "\n";
    }
    size_t failed = 0;
    for (const auto& e : entries)
        if (!e.pass) ++failed;
    os << entries.size() << " checks, " << failed << " failed\n";
    return os.str();
}

// --- CLI commands ---

void cmd_generate(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    save_dataset(ds, cfg.data_dir);
}

void cmd_train(const RunConfig& cfg) {
    cfg.validate();
    Dataset ds = load_dataset(cfg.data_dir);
    TrainResult result = train_head(cfg, ds);
    save_checkpoint(cfg.checkpoint_path, cfg, result.params, result.opt, result.steps);
    std::ostringstream log;
    log << std::setprecision(17);
    for (const TrainLogEntry& e : result.log) {
        log << "step=" << e.step << " loss=" << e.loss;
        if (e.val_map) log << " val_map=" << *e.val_map;
        log << "\n";
    }
    write_text_file(cfg.checkpoint_path + ".log", log.str());
}

EvalResult cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
    RunConfig run = ck.config;  // model/backbone settings come from the snapshot
    run.data_dir = cfg.data_dir;
    run.report_path = cfg.report_path;
    if (cfg.num_classes != run.num_classes || cfg.c_slow != run.c_slow ||
        cfg.c_fast != run.c_fast || cfg.feat_size != run.feat_size || cfg.t_raw != run.t_raw ||
        cfg.fast_stride != run.fast_stride || cfg.slow_stride != run.slow_stride)
        throw ConfigError("eval: config dimensions do not match checkpoint snapshot");
    Dataset ds = load_dataset(run.data_dir);
    EvalResult result = eval_head(run, ck.params, ds.val);
    write_text_file(run.report_path, result.report());
    return result;
}

void cmd_ablate(const RunConfig& cfg) {
    cfg.validate();
    AblateReport report = run_ablation(cfg, {cfg.seed, cfg.seed + 1, cfg.seed + 2});
    write_text_file(cfg.report_path, report.text());
    std::cout << report.text();
}

bool cmd_gradcheck(const RunConfig& cfg) {
    auto entries = gradcheck_suite(cfg.seed);
    std::cout << gradcheck_report(entries);
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

}  // namespace stcx
