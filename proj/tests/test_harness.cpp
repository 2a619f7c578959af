#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "stcx/harness.hpp"

using namespace stcx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("stcx_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int counter;
};
int TempDir::counter = 0;

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.num_clips = 10;
    cfg.steps = 0;
    return cfg;
}

std::vector<double> flatten(HeadParams& p) {
    std::vector<double> out;
    p.visit([&](const std::string&, Tensor& t) {
        out.insert(out.end(), t.data().begin(), t.data().end());
    });
    return out;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

}  // namespace

TEST_CASE("derive_seed separates streams and is deterministic") {
    CHECK(derive_seed(7, 1) == derive_seed(7, 1));
    CHECK(derive_seed(7, 1) != derive_seed(7, 2));
    CHECK(derive_seed(7, 1) != derive_seed(8, 1));
    std::set<uint64_t> vals;
    for (uint64_t s = 0; s < 100; ++s) vals.insert(derive_seed(s, 3));
    CHECK(vals.size() == 100);
}

TEST_CASE("config serialize/parse round-trips every field") {
    RunConfig cfg;
    cfg.seed = 123;
    cfg.num_clips = 42;
    cfg.train_ratio = 0.75;
    cfg.lr = 0.0123456789012345;
    cfg.variant = "spatial_ctx";
    cfg.actor_pos_embedding = false;
    cfg.data_dir = "some/dir";
    RunConfig back = parse_config(serialize_config(cfg));
    CHECK(back.seed == cfg.seed);
    CHECK(back.num_clips == cfg.num_clips);
    CHECK(back.train_ratio == cfg.train_ratio);
    CHECK(back.lr == cfg.lr);  // %.17g keeps doubles exact
    CHECK(back.variant == cfg.variant);
    CHECK(back.actor_pos_embedding == cfg.actor_pos_embedding);
    CHECK(back.data_dir == cfg.data_dir);
    CHECK(serialize_config(back) == serialize_config(cfg));
}

TEST_CASE("config parser accepts comments and rejects unknown keys") {
    RunConfig cfg = parse_config("# a comment\nseed = 9\n\nsteps = 3 # trailing\n");
    CHECK(cfg.seed == 9);
    CHECK(cfg.steps == 3);
    CHECK_THROWS_AS(parse_config("sede = 9\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("steps = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("variant = not_a_variant\n").validate(), ConfigError);
}

TEST_CASE("clip save/load round-trips frames, boxes, and labels") {
    TempDir dir;
    SyntheticClip clip = generate_clip(5, false, tiny_config().world());
    clip.clip_id = 17;
    save_clip(clip, dir.file("clip.bin"));
    SyntheticClip back = load_clip(dir.file("clip.bin"));
    CHECK(back.clip_id == 17);
    CHECK(back.frames.shape() == clip.frames.shape());
    for (int64_t i = 0; i < clip.frames.size(); ++i) {
        // frames are stored as f32; round-trip must be exact at f32 precision
        CHECK(static_cast<float>(clip.frames.data()[i]) ==
              static_cast<float>(back.frames.data()[i]));
    }
    REQUIRE(back.proposals.size() == clip.proposals.size());
    for (size_t i = 0; i < clip.proposals.size(); ++i) {
        CHECK(back.proposals[i].x1 == clip.proposals[i].x1);
        CHECK(back.proposals[i].confidence == clip.proposals[i].confidence);
        CHECK(back.proposals[i].is_ground_truth == clip.proposals[i].is_ground_truth);
    }
    CHECK_THROWS_AS(load_clip(dir.file("missing.bin")), IoError);
}

TEST_CASE("dataset save/load preserves splits, directions, and labels") {
    TempDir dir;
    RunConfig cfg = tiny_config();
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    save_dataset(ds, dir.file("data"));
    Dataset back = load_dataset(dir.file("data"));
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.val.size() == ds.val.size());
    for (size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].clip_id == ds.train[i].clip_id);
        CHECK(back.train[i].give == ds.train[i].give);
        CHECK(back.train[i].gt_labels == ds.train[i].gt_labels);
        REQUIRE(back.train[i].gt_boxes.size() == ds.train[i].gt_boxes.size());
    }
}

TEST_CASE("ground truth and detection text files round-trip") {
    TempDir dir;
    RunConfig cfg = tiny_config();
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    auto gts = dataset_ground_truth(ds.val);
    REQUIRE(!gts.empty());
    write_ground_truth(gts, dir.file("gt.txt"));
    auto back = read_ground_truth(dir.file("gt.txt"));
    REQUIRE(back.size() == gts.size());
    for (size_t i = 0; i < gts.size(); ++i) {
        CHECK(back[i].clip_id == gts[i].clip_id);
        CHECK(back[i].class_id == gts[i].class_id);
        CHECK(back[i].box.x1 == gts[i].box.x1);
    }

    std::vector<DetectionRecord> dets;
    DetectionRecord d;
    d.clip_id = 3;
    d.box = gts[0].box;
    d.class_id = 2;
    d.score = 0.123456789012345;
    dets.push_back(d);
    write_detections(dets, dir.file("det.txt"));
    auto dback = read_detections(dir.file("det.txt"));
    REQUIRE(dback.size() == 1);
    CHECK(dback[0].score == d.score);
    CHECK(dback[0].class_id == 2);
}

TEST_CASE("checkpoint round-trip is byte-identical and restores state") {
    TempDir dir;
    RunConfig cfg = tiny_config();
    HeadParams params = HeadParams::init(cfg.head(), 77);
    SgdOptimizer opt;
    opt.lr = cfg.lr;
    opt.momentum = cfg.momentum;
    // give the optimizer some velocity so that state is non-trivial
    params.visit([](const std::string&, Tensor& t) {
        t.zero_grad();
        t.grad()[0] = 0.5;
    });
    opt.step(params);

    save_checkpoint(dir.file("a.bin"), cfg, params, opt, 41);
    LoadedCheckpoint lc = load_checkpoint(dir.file("a.bin"));
    CHECK(lc.step == 41);
    CHECK(serialize_config(lc.config) == serialize_config(cfg));
    CHECK(flatten(lc.params) == flatten(params));
    CHECK(lc.opt.velocity == opt.velocity);

    save_checkpoint(dir.file("b.bin"), lc.config, lc.params, lc.opt, lc.step);
    CHECK(slurp(dir.file("a.bin")) == slurp(dir.file("b.bin")));
}

TEST_CASE("prepare_clip applies the confidence and IoU rules") {
    RunConfig cfg = tiny_config();
    SyntheticClip clip = generate_clip(11, true, cfg.world());
    BackboneStubParams stub = BackboneStubParams::init(cfg.world(), derive_seed(cfg.seed, 1));

    ClipExample train_ex = prepare_clip(clip, stub, cfg, true);
    // training keeps GT-flagged boxes and IoU-matched high-confidence copies
    REQUIRE(!train_ex.boxes.empty());
    CHECK(train_ex.labels.shape()[0] == static_cast<int64_t>(train_ex.boxes.size()));
    CHECK(train_ex.labels.shape()[1] == cfg.num_classes);
    for (const ActorBox& b : train_ex.boxes) CHECK((b.is_ground_truth || b.confidence > 0.8));
    // every kept box overlaps some GT at the IoU threshold
    for (const ActorBox& b : train_ex.boxes) {
        double best = 0.0;
        for (const ActorBox& g : clip.gt_boxes) best = std::max(best, iou(b, g));
        CHECK(best >= cfg.iou_threshold);
    }

    ClipExample eval_ex = prepare_clip(clip, stub, cfg, false);
    // eval uses detector-style proposals only: no GT boxes, conf > 0.8
    for (const ActorBox& b : eval_ex.boxes) {
        CHECK_FALSE(b.is_ground_truth);
        CHECK(b.confidence > 0.8);
    }
    CHECK_FALSE(eval_ex.labels.defined());
    CHECK(eval_ex.actors.size() == eval_ex.boxes.size());

    // a proposal at exactly 0.79 must not survive evaluation filtering
    SyntheticClip doctored = clip;
    for (auto& p : doctored.proposals)
        if (!p.is_ground_truth) p.confidence = 0.79;
    ClipExample strict = prepare_clip(doctored, stub, cfg, false);
    CHECK(strict.boxes.empty());
}

TEST_CASE("train_head with zero steps returns the seeded initialization") {
    RunConfig cfg = tiny_config();
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    TrainResult r = train_head(cfg, ds);
    CHECK(r.steps == 0);
    HeadParams fresh = HeadParams::init(cfg.head(), derive_seed(cfg.seed, 2));
    CHECK(flatten(r.params) == flatten(fresh));
}

TEST_CASE("training reduces the loss on every tested seed") {
    for (uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        RunConfig cfg = tiny_config();
        cfg.seed = seed;
        cfg.num_clips = 16;
        cfg.steps = 60;
        cfg.log_every = 10;
        Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
        TrainResult r = train_head(cfg, ds);
        REQUIRE(r.log.size() >= 2);
        double first = r.log.front().loss;
        double last = r.log.back().loss;
        CHECK(last < first);
        CHECK(std::isfinite(last));
    }
}

TEST_CASE("training is bit-deterministic in the seed") {
    RunConfig cfg = tiny_config();
    cfg.num_clips = 12;
    cfg.steps = 20;
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    TrainResult a = train_head(cfg, ds);
    TrainResult b = train_head(cfg, ds);
    CHECK(flatten(a.params) == flatten(b.params));
}

TEST_CASE("eval_head is deterministic and scores every actor-class pair") {
    RunConfig cfg = tiny_config();
    cfg.num_clips = 12;
    Dataset ds = make_dataset(cfg.num_clips, cfg.seed, cfg.train_ratio, cfg.world());
    HeadParams params = HeadParams::init(cfg.head(), 5);
    std::vector<DetectionRecord> d1, d2;
    EvalResult r1 = eval_head(cfg, params, ds.val, &d1);
    EvalResult r2 = eval_head(cfg, params, ds.val, &d2);
    CHECK(r1.mean_ap == r2.mean_ap);
    REQUIRE(d1.size() == d2.size());
    for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i].score == d2[i].score);
    CHECK(d1.size() % cfg.num_classes == 0);
    for (const auto& d : d1) {
        CHECK(d.score > 0.0);
        CHECK(d.score < 1.0);
    }
}

TEST_CASE("direction_map averages the two direction classes") {
    EvalResult r;
    r.per_class_ap = {0.8, 0.6, 0.1, 0.2, 0.3, 0.4};
    r.gt_counts = {1, 1, 1, 1, 1, 1};
    CHECK(direction_map(r) == doctest::Approx(0.7));
}

TEST_CASE("gradcheck report lines carry pass status and tolerances") {
    std::vector<GradCheckEntry> entries = {{"op_a", 1e-9, 1e-8, true},
                                           {"op_b", 2e-3, 1e-4, false}};
    std::string text = gradcheck_report(entries);
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("FAIL") != std::string::npos);
    CHECK(text.find("op_b") != std::string::npos);
}

TEST_CASE("cmd_generate then cmd_train then cmd_eval runs end to end") {
    TempDir dir;
    RunConfig cfg = tiny_config();
    cfg.num_clips = 12;
    cfg.steps = 10;
    cfg.data_dir = dir.file("data");
    cfg.checkpoint_path = dir.file("ck.bin");
    cfg.report_path = dir.file("report.txt");
    cmd_generate(cfg);
    CHECK(fs::exists(dir.file("data")));
    cmd_train(cfg);
    CHECK(fs::exists(dir.file("ck.bin")));
    EvalResult r = cmd_eval(cfg, cfg.checkpoint_path);
    CHECK(r.per_class_ap.size() == static_cast<size_t>(cfg.num_classes));
    CHECK(fs::exists(dir.file("report.txt")));

    // checkpoint/config dimension mismatch is rejected
    RunConfig other = cfg;
    other.c_slow = 8;
    CHECK_THROWS_AS(cmd_eval(other, cfg.checkpoint_path), ConfigError);
}
