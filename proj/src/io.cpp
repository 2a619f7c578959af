#include "stcx/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace stcx {

namespace {

constexpr char kClipMagic[8] = {'S', 'T', 'C', 'X', 'C', 'L', 'I', 'P'};
constexpr char kCkptMagic[8] = {'S', 'T', 'C', 'X', 'C', 'K', 'P', 'T'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated file while reading " + what);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& what) {
    uint64_t len = read_pod<uint64_t>(is, what);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError("truncated file while reading " + what);
    return s;
}

std::string fmt_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    return out;
}

std::string box_line(int64_t clip_id, const ActorBox& b) {
    std::ostringstream os;
    os << clip_id << "," << fmt_coord(b.x1) << "," << fmt_coord(b.y1) << "," << fmt_coord(b.x2)
       << "," << fmt_coord(b.y2) << "," << fmt_coord(b.confidence) << ","
       << (b.is_ground_truth ? 1 : 0);
    return os.str();
}

std::pair<int64_t, ActorBox> parse_box_line(const std::string& line) {
    auto f = split_csv(line);
    if (f.size() != 7) throw IoError("malformed box record: " + line);
    ActorBox b;
    int64_t clip_id = std::stoll(f[0]);
    b.x1 = std::stod(f[1]);
    b.y1 = std::stod(f[2]);
    b.x2 = std::stod(f[3]);
    b.y2 = std::stod(f[4]);
    b.confidence = std::stod(f[5]);
    b.is_ground_truth = std::stoll(f[6]) != 0;
    return {clip_id, b};
}

}  // namespace

void save_clip(const SyntheticClip& clip, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write clip file: " + path);
    os.write(kClipMagic, sizeof(kClipMagic));
    write_pod<uint32_t>(os, kFormatVersion);
    for (int64_t e : clip.frames.shape()) write_pod<uint32_t>(os, static_cast<uint32_t>(e));
    for (double v : clip.frames.data()) write_pod<float>(os, static_cast<float>(v));
    for (const ActorBox& b : clip.proposals) os << box_line(clip.clip_id, b) << "\n";
    if (!os) throw IoError("write failed for clip file: " + path);
}

SyntheticClip load_clip(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open clip file: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kClipMagic, sizeof(magic)) != 0)
        throw IoError("bad magic in clip file: " + path);
    uint32_t version = read_pod<uint32_t>(is, "clip version");
    if (version != kFormatVersion) throw IoError("unsupported clip format version");
    Shape shape(4);
    for (auto& e : shape) e = read_pod<uint32_t>(is, "clip shape");
    int64_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (auto& v : data) v = read_pod<float>(is, "clip frames");
    SyntheticClip clip;
    clip.frames = Tensor(shape, std::move(data));
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto [clip_id, box] = parse_box_line(line);
        clip.clip_id = clip_id;
        clip.proposals.push_back(box);
        if (box.is_ground_truth) clip.gt_boxes.push_back(box);
    }
    clip.gt_labels.resize(clip.gt_boxes.size());
    return clip;
}

std::vector<GroundTruthRecord> dataset_ground_truth(const std::vector<SyntheticClip>& clips) {
    std::vector<GroundTruthRecord> out;
    for (const SyntheticClip& clip : clips) {
        for (size_t a = 0; a < clip.gt_boxes.size(); ++a) {
            for (int cls : clip.gt_labels[a]) {
                GroundTruthRecord r;
                r.clip_id = clip.clip_id;
                r.box = clip.gt_boxes[a];
                r.class_id = cls;
                out.push_back(r);
            }
        }
    }
    return out;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "clips", ec);
    if (ec) throw IoError("cannot create dataset directory: " + dir);

    std::ofstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("cannot write manifest in " + dir);
    auto dump_split = [&](const std::vector<SyntheticClip>& clips, const char* split) {
        for (const SyntheticClip& clip : clips) {
            char name[64];
            std::snprintf(name, sizeof(name), "clips/clip_%05lld.bin",
                          static_cast<long long>(clip.clip_id));
            save_clip(clip, (fs::path(dir) / name).string());
            manifest << clip.clip_id << "," << name << "," << split << ","
                     << (clip.give ? "give" : "receive") << "," << clip.seed << "\n";
        }
    };
    dump_split(ds.train, "train");
    dump_split(ds.val, "val");
    if (!manifest) throw IoError("write failed for manifest in " + dir);

    std::vector<GroundTruthRecord> gts = dataset_ground_truth(ds.train);
    auto val_gts = dataset_ground_truth(ds.val);
    gts.insert(gts.end(), val_gts.begin(), val_gts.end());
    write_ground_truth(gts, (fs::path(dir) / "gt.txt").string());
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.txt");
    if (!manifest) throw IoError("cannot open manifest in " + dir);
    Dataset ds;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 5) throw IoError("malformed manifest line: " + line);
        SyntheticClip clip = load_clip((fs::path(dir) / f[1]).string());
        clip.clip_id = std::stoll(f[0]);
        clip.give = f[3] == "give";
        clip.seed = std::stoull(f[4]);
        (f[2] == "train" ? ds.train : ds.val).push_back(std::move(clip));
    }
    std::map<int64_t, SyntheticClip*> by_id;
    for (auto& clip : ds.train) by_id[clip.clip_id] = &clip;
    for (auto& clip : ds.val) by_id[clip.clip_id] = &clip;
    for (const GroundTruthRecord& r : read_ground_truth((fs::path(dir) / "gt.txt").string())) {
        auto it = by_id.find(r.clip_id);
        if (it == by_id.end()) throw IoError("ground truth references unknown clip");
        SyntheticClip* clip = it->second;
        bool attached = false;
        for (size_t a = 0; a < clip->gt_boxes.size(); ++a) {
            const ActorBox& g = clip->gt_boxes[a];
            if (std::abs(g.x1 - r.box.x1) < 1e-12 && std::abs(g.y1 - r.box.y1) < 1e-12 &&
                std::abs(g.x2 - r.box.x2) < 1e-12 && std::abs(g.y2 - r.box.y2) < 1e-12) {
                clip->gt_labels[a].push_back(r.class_id);
                attached = true;
                break;
            }
        }
        if (!attached) throw IoError("ground truth box does not match any actor box");
    }
    return ds;
}

void write_ground_truth(const std::vector<GroundTruthRecord>& gts, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write ground-truth file: " + path);
    for (const auto& r : gts) {
        os << r.clip_id << "," << fmt_coord(r.box.x1) << "," << fmt_coord(r.box.y1) << ","
           << fmt_coord(r.box.x2) << "," << fmt_coord(r.box.y2) << "," << r.class_id << "\n";
    }
    if (!os) throw IoError("write failed for ground-truth file: " + path);
}

std::vector<GroundTruthRecord> read_ground_truth(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open ground-truth file: " + path);
    std::vector<GroundTruthRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 6) throw IoError("malformed ground-truth record: " + line);
        GroundTruthRecord r;
        r.clip_id = std::stoll(f[0]);
        r.box.x1 = std::stod(f[1]);
        r.box.y1 = std::stod(f[2]);
        r.box.x2 = std::stod(f[3]);
        r.box.y2 = std::stod(f[4]);
        r.class_id = static_cast<int>(std::stoll(f[5]));
        out.push_back(r);
    }
    return out;
}

void write_detections(const std::vector<DetectionRecord>& dets, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write detections file: " + path);
    for (const auto& r : dets) {
        os << r.clip_id << "," << fmt_coord(r.box.x1) << "," << fmt_coord(r.box.y1) << ","
           << fmt_coord(r.box.x2) << "," << fmt_coord(r.box.y2) << "," << r.class_id << ","
           << fmt_coord(r.score) << "\n";
    }
    if (!os) throw IoError("write failed for detections file: " + path);
}

std::vector<DetectionRecord> read_detections(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open detections file: " + path);
    std::vector<DetectionRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 7) throw IoError("malformed detection record: " + line);
        DetectionRecord r;
        r.clip_id = std::stoll(f[0]);
        r.box.x1 = std::stod(f[1]);
        r.box.y1 = std::stod(f[2]);
        r.box.x2 = std::stod(f[3]);
        r.box.y2 = std::stod(f[4]);
        r.class_id = static_cast<int>(std::stoll(f[5]));
        r.score = std::stod(f[6]);
        out.push_back(r);
    }
    return out;
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, HeadParams& params,
                     const SgdOptimizer& opt, uint64_t step) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kCkptMagic, sizeof(kCkptMagic));
    write_pod<uint32_t>(os, kFormatVersion);
    write_string(os, serialize_config(cfg));
    write_pod<uint64_t>(os, step);

    uint64_t count = 0;
    params.visit([&](const std::string&, Tensor&) { ++count; });
    write_pod<uint64_t>(os, count);
    params.visit([&](const std::string& name, Tensor& t) {
        write_string(os, name);
        write_pod<uint64_t>(os, t.shape().size());
        for (int64_t e : t.shape()) write_pod<uint64_t>(os, static_cast<uint64_t>(e));
        write_pod<uint64_t>(os, t.data().size());
        os.write(reinterpret_cast<const char*>(t.data().data()),
                 static_cast<std::streamsize>(t.data().size() * sizeof(double)));
    });

    write_pod<uint64_t>(os, opt.velocity.size());
    for (const auto& [name, vel] : opt.velocity) {
        write_string(os, name);
        write_pod<uint64_t>(os, vel.size());
        os.write(reinterpret_cast<const char*>(vel.data()),
                 static_cast<std::streamsize>(vel.size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed for checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw IoError("bad magic in checkpoint: " + path);
    uint32_t version = read_pod<uint32_t>(is, "checkpoint version");
    if (version != kFormatVersion) throw IoError("unsupported checkpoint version");

    LoadedCheckpoint ck;
    ck.config = parse_config(read_string(is, "checkpoint config"));
    ck.step = read_pod<uint64_t>(is, "checkpoint step");

    struct StoredTensor {
        Shape shape;
        std::vector<double> data;
    };
    std::map<std::string, StoredTensor> stored;
    uint64_t count = read_pod<uint64_t>(is, "parameter count");
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = read_string(is, "parameter name");
        uint64_t rank = read_pod<uint64_t>(is, "parameter rank");
        StoredTensor st;
        for (uint64_t r = 0; r < rank; ++r)
            st.shape.push_back(static_cast<int64_t>(read_pod<uint64_t>(is, "parameter extent")));
        uint64_t n = read_pod<uint64_t>(is, "parameter length");
        if (static_cast<int64_t>(n) != shape_numel(st.shape))
            throw IoError("checkpoint: shape metadata does not match data length for " + name);
        st.data.resize(n);
        is.read(reinterpret_cast<char*>(st.data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw IoError("truncated checkpoint while reading " + name);
        stored.emplace(std::move(name), std::move(st));
    }

    ck.params = HeadParams::init(ck.config.head(), 0);
    ck.params.visit([&](const std::string& name, Tensor& t) {
        auto it = stored.find(name);
        if (it == stored.end()) throw IoError("checkpoint missing parameter " + name);
        if (it->second.shape != t.shape())
            throw IoError("checkpoint/config dimension mismatch for " + name + ": stored " +
                          shape_str(it->second.shape) + " vs expected " + shape_str(t.shape()));
        t.data() = it->second.data;
        stored.erase(it);
    });
    if (!stored.empty())
        throw IoError("checkpoint contains unknown parameter " + stored.begin()->first);

    ck.opt.lr = ck.config.lr;
    ck.opt.momentum = ck.config.momentum;
    uint64_t vcount = read_pod<uint64_t>(is, "velocity count");
    for (uint64_t i = 0; i < vcount; ++i) {
        std::string name = read_string(is, "velocity name");
        uint64_t n = read_pod<uint64_t>(is, "velocity length");
        std::vector<double> v(n);
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw IoError("truncated checkpoint while reading velocity " + name);
        ck.opt.velocity.emplace(std::move(name), std::move(v));
    }
    return ck;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write file: " + path);
    os << text;
    if (!os) throw IoError("write failed for file: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

}  // namespace stcx
