#include "stcx/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stcx {

WorldConfig RunConfig::world() const {
    WorldConfig w;
    w.t_raw = t_raw;
    w.img_size = img_size;
    w.feat_size = feat_size;
    w.c_slow = c_slow;
    w.c_fast = c_fast;
    w.num_classes = num_classes;
    w.slow_stride = slow_stride;
    w.fast_stride = fast_stride;
    return w;
}

HeadConfig RunConfig::head() const {
    HeadConfig h;
    h.slow_channels = c_slow;
    h.fast_channels = c_fast;
    h.num_heads = num_heads;
    h.ffn_hidden = ffn_hidden;
    h.num_classes = num_classes;
    h.spatial_tokens = feat_size * feat_size;
    h.temporal_tokens = t_raw / fast_stride;
    h.actor_pos_embedding = actor_pos_embedding;
    h.context_pos_embedding = context_pos_embedding;
    h.variant = parse_variant(variant);
    return h;
}

void RunConfig::validate() const {
    world().validate();
    head().validate();
    if (num_clips < 0) throw ConfigError("config: num_clips must be non-negative");
    if (train_ratio <= 0.0 || train_ratio >= 1.0)
        throw ConfigError("config: train_ratio must lie strictly between 0 and 1");
    if (lr <= 0.0) throw ConfigError("config: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("config: momentum must be in [0,1)");
    if (steps < 0 || batch_size < 1) throw ConfigError("config: invalid steps/batch_size");
    if (confidence_threshold < 0.0 || confidence_threshold > 1.0)
        throw ConfigError("config: confidence_threshold must be in [0,1]");
    if (iou_threshold <= 0.0 || iou_threshold > 1.0)
        throw ConfigError("config: iou_threshold must be in (0,1]");
    if (data_dir.empty() || checkpoint_path.empty() || report_path.empty())
        throw ConfigError("config: paths must be non-empty");
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid integer for " + key + ": '" + v + "'");
    }
}

uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid unsigned integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: invalid number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config: invalid boolean for " + key + ": '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "seed") cfg.seed = parse_uint(key, val);
        else if (key == "num_clips") cfg.num_clips = parse_int(key, val);
        else if (key == "train_ratio") cfg.train_ratio = parse_double(key, val);
        else if (key == "img_size") cfg.img_size = parse_int(key, val);
        else if (key == "feat_size") cfg.feat_size = parse_int(key, val);
        else if (key == "t_raw") cfg.t_raw = parse_int(key, val);
        else if (key == "c_slow") cfg.c_slow = parse_int(key, val);
        else if (key == "c_fast") cfg.c_fast = parse_int(key, val);
        else if (key == "num_classes") cfg.num_classes = parse_int(key, val);
        else if (key == "slow_stride") cfg.slow_stride = parse_int(key, val);
        else if (key == "fast_stride") cfg.fast_stride = parse_int(key, val);
        else if (key == "num_heads") cfg.num_heads = parse_int(key, val);
        else if (key == "ffn_hidden") cfg.ffn_hidden = parse_int(key, val);
        else if (key == "variant") cfg.variant = val;
        else if (key == "actor_pos_embedding") cfg.actor_pos_embedding = parse_bool(key, val);
        else if (key == "context_pos_embedding") cfg.context_pos_embedding = parse_bool(key, val);
        else if (key == "lr") cfg.lr = parse_double(key, val);
        else if (key == "momentum") cfg.momentum = parse_double(key, val);
        else if (key == "steps") cfg.steps = parse_int(key, val);
        else if (key == "batch_size") cfg.batch_size = parse_int(key, val);
        else if (key == "confidence_threshold") cfg.confidence_threshold = parse_double(key, val);
        else if (key == "iou_threshold") cfg.iou_threshold = parse_double(key, val);
        else if (key == "log_every") cfg.log_every = parse_int(key, val);
        else if (key == "val_every") cfg.val_every = parse_int(key, val);
        else if (key == "data_dir") cfg.data_dir = val;
        else if (key == "checkpoint_path") cfg.checkpoint_path = val;
        else if (key == "report_path") cfg.report_path = val;
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "seed=" << cfg.seed << "\n";
    os << "num_clips=" << cfg.num_clips << "\n";
    os << "train_ratio=" << fmt_double(cfg.train_ratio) << "\n";
    os << "img_size=" << cfg.img_size << "\n";
    os << "feat_size=" << cfg.feat_size << "\n";
    os << "t_raw=" << cfg.t_raw << "\n";
    os << "c_slow=" << cfg.c_slow << "\n";
    os << "c_fast=" << cfg.c_fast << "\n";
    os << "num_classes=" << cfg.num_classes << "\n";
    os << "slow_stride=" << cfg.slow_stride << "\n";
    os << "fast_stride=" << cfg.fast_stride << "\n";
    os << "num_heads=" << cfg.num_heads << "\n";
    os << "ffn_hidden=" << cfg.ffn_hidden << "\n";
    os << "variant=" << cfg.variant << "\n";
    os << "actor_pos_embedding=" << (cfg.actor_pos_embedding ? 1 : 0) << "\n";
    os << "context_pos_embedding=" << (cfg.context_pos_embedding ? 1 : 0) << "\n";
    os << "lr=" << fmt_double(cfg.lr) << "\n";
    os << "momentum=" << fmt_double(cfg.momentum) << "\n";
    os << "steps=" << cfg.steps << "\n";
    os << "batch_size=" << cfg.batch_size << "\n";
    os << "confidence_threshold=" << fmt_double(cfg.confidence_threshold) << "\n";
    os << "iou_threshold=" << fmt_double(cfg.iou_threshold) << "\n";
    os << "log_every=" << cfg.log_every << "\n";
    os << "val_every=" << cfg.val_every << "\n";
    os << "data_dir=" << cfg.data_dir << "\n";
    os << "checkpoint_path=" << cfg.checkpoint_path << "\n";
    os << "report_path=" << cfg.report_path << "\n";
    return os.str();
}

}  // namespace stcx
