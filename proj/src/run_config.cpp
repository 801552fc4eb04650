#include "sdfscore/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace sdfscore {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

struct KeyDef {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': not a finite number: '" + v + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': not an integer: '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        unsigned long long i = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': not an unsigned integer: '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw config_error("config key '" + key + "': expected true/false, got '" + v + "'");
}

#define DOUBLE_KEY(field) \
    {#field, [](const RunConfig& c) { return format_double(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_double(#field, v); }}
#define INT_KEY(field) \
    {#field, [](const RunConfig& c) { return std::to_string(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = int(parse_int(#field, v)); }}
#define U64_KEY(field) \
    {#field, [](const RunConfig& c) { return std::to_string(c.field); }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_u64(#field, v); }}
#define BOOL_KEY(field) \
    {#field, [](const RunConfig& c) { return c.field ? "true" : "false"; }, \
     [](RunConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }}
#define STRING_KEY(field) \
    {#field, [](const RunConfig& c) { return c.field; }, \
     [](RunConfig& c, const std::string& v) { c.field = v; }}

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> keys = {
        DOUBLE_KEY(sigma_min),
        DOUBLE_KEY(sigma_max),
        DOUBLE_KEY(delta),
        DOUBLE_KEY(threshold_tau),
        DOUBLE_KEY(learning_rate),
        DOUBLE_KEY(adam_beta1),
        DOUBLE_KEY(adam_beta2),
        DOUBLE_KEY(adam_eps),
        INT_KEY(batch_size),
        INT_KEY(total_steps),
        STRING_KEY(target_mode),
        INT_KEY(base_channels),
        INT_KEY(checkpoint_every),
        BOOL_KEY(augment_flips),
        INT_KEY(grid),
        INT_KEY(n_samples),
        INT_KEY(min_ellipses),
        INT_KEY(max_ellipses),
        DOUBLE_KEY(min_radius_frac),
        DOUBLE_KEY(max_radius_frac),
        INT_KEY(predictor_steps),
        INT_KEY(corrector_steps),
        DOUBLE_KEY(corrector_snr),
        INT_KEY(ensemble_runs),
        STRING_KEY(score_precision),
        INT_KEY(band),
        U64_KEY(seed),
    };
    return keys;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, bool> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        const KeyDef* def = nullptr;
        for (const KeyDef& k : registry())
            if (k.name == key) {
                def = &k;
                break;
            }
        if (!def) throw config_error("unknown config key: '" + key + "'");
        if (seen[key]) throw config_error("duplicate config key: '" + key + "'");
        seen[key] = true;
        def->set(cfg, val);
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    for (const KeyDef& k : registry()) os << k.name << " = " << k.get(*this) << "\n";
    return os.str();
}

void RunConfig::validate() const {
    if (!(sigma_min > 0.0 && sigma_min < sigma_max))
        throw config_error("config: need 0 < sigma_min < sigma_max");
    if (delta < 0.0) throw config_error("config: delta must be >= 0 (0 = auto)");
    if (threshold_tau < 0.0) throw config_error("config: threshold_tau must be >= 0");
    if (!(learning_rate > 0.0)) throw config_error("config: learning_rate must be > 0");
    if (batch_size < 1) throw config_error("config: batch_size must be >= 1");
    if (total_steps < 1) throw config_error("config: total_steps must be >= 1");
    if (target_mode != "sdf" && target_mode != "binary")
        throw config_error("config: target_mode must be sdf or binary");
    if (base_channels < 1 || base_channels > 256)
        throw config_error("config: base_channels out of range");
    if (checkpoint_every < 1) throw config_error("config: checkpoint_every must be >= 1");
    if (grid < 16 || grid > 128 || grid % 2 != 0)
        throw config_error("config: grid must be even and within [16,128]");
    if (n_samples < 0) throw config_error("config: n_samples must be >= 0");
    if (min_ellipses < 1 || max_ellipses < min_ellipses)
        throw config_error("config: ellipse counts out of range");
    if (!(min_radius_frac > 0.0 && max_radius_frac >= min_radius_frac && max_radius_frac <= 0.5))
        throw config_error("config: radius fractions out of range");
    if (predictor_steps < 2) throw config_error("config: predictor_steps must be >= 2");
    if (corrector_steps < 0) throw config_error("config: corrector_steps must be >= 0");
    if (!(corrector_snr > 0.0)) throw config_error("config: corrector_snr must be > 0");
    if (ensemble_runs < 1) throw config_error("config: ensemble_runs must be >= 1");
    if (score_precision != "f32" && score_precision != "f64")
        throw config_error("config: score_precision must be f32 or f64");
    if (band < 1) throw config_error("config: band must be >= 1");
}

TrainConfig RunConfig::train_config(int grid_w, int grid_h) const {
    TrainConfig t;
    t.learning_rate = learning_rate;
    t.adam_beta1 = adam_beta1;
    t.adam_beta2 = adam_beta2;
    t.adam_eps = adam_eps;
    t.batch_size = batch_size;
    t.total_steps = total_steps;
    t.seed = seed;
    t.target_mode = parse_target_mode(target_mode);
    t.delta = resolved_delta(grid_w, grid_h);
    t.sigma_min = sigma_min;
    t.sigma_max = sigma_max;
    t.augment_flips = augment_flips;
    return t;
}

}  // namespace sdfscore
