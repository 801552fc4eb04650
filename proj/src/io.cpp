#include "sdfscore/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sdfscore {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for reading: " + path.string());
    return f;
}

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
void write_f32(std::ofstream& f, float v) { f.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::ifstream& f, const fs::path& p) {
    uint32_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 4)) throw io_error("truncated file: " + p.string());
    return v;
}
uint64_t read_u64(std::ifstream& f, const fs::path& p) {
    uint64_t v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 8)) throw io_error("truncated file: " + p.string());
    return v;
}
float read_f32(std::ifstream& f, const fs::path& p) {
    float v = 0;
    if (!f.read(reinterpret_cast<char*>(&v), 4)) throw io_error("truncated file: " + p.string());
    return v;
}

std::pair<int, int> read_pgm_header(std::ifstream& f, const fs::path& p) {
    std::string magic;
    f >> magic;
    if (magic != "P5") throw io_error("not a P5 PGM: " + p.string());
    int w = 0, h = 0, maxval = 0;
    // skip whitespace and comment lines
    auto next_int = [&](int& out) {
        while (true) {
            int c = f.peek();
            if (c == EOF) break;
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                f.get();
            } else {
                break;
            }
        }
        if (!(f >> out)) throw io_error("malformed PGM header: " + p.string());
    };
    next_int(w);
    next_int(h);
    next_int(maxval);
    if (w < 1 || h < 1) throw io_error("bad PGM dimensions: " + p.string());
    if (maxval != 255) throw io_error("PGM maxval must be 255: " + p.string());
    f.get();  // single whitespace before raster
    return {w, h};
}

}  // namespace

void save_mask_pgm(const fs::path& path, const BinaryMask& mask) {
    validate_mask(mask);
    std::ofstream f = open_out(path);
    f << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<uint8_t> bytes(mask.size());
    for (size_t i = 0; i < bytes.size(); i++) bytes[i] = mask.labels[i] ? 255 : 0;
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw io_error("write failed: " + path.string());
}

BinaryMask load_mask_pgm(const fs::path& path) {
    std::ifstream f = open_in(path);
    auto [w, h] = read_pgm_header(f, path);
    std::vector<uint8_t> bytes(size_t(w) * h);
    if (!f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
        throw io_error("truncated PGM raster: " + path.string());
    BinaryMask m(w, h);
    for (size_t i = 0; i < bytes.size(); i++) {
        if (bytes[i] != 0 && bytes[i] != 255)
            throw io_error("mask PGM must contain only 0 and 255: " + path.string());
        m.labels[i] = bytes[i] ? 1 : 0;
    }
    return m;
}

void save_gray_pgm(const fs::path& path, const Field& img) {
    std::ofstream f = open_out(path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> bytes(img.size());
    for (size_t i = 0; i < bytes.size(); i++) {
        double v = std::clamp(img.values[i], 0.0, 1.0);
        bytes[i] = uint8_t(std::lround(v * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw io_error("write failed: " + path.string());
}

Field load_gray_pgm(const fs::path& path) {
    std::ifstream f = open_in(path);
    auto [w, h] = read_pgm_header(f, path);
    std::vector<uint8_t> bytes(size_t(w) * h);
    if (!f.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
        throw io_error("truncated PGM raster: " + path.string());
    Field img(w, h);
    for (size_t i = 0; i < bytes.size(); i++) img.values[i] = double(bytes[i]) / 255.0;
    return img;
}

void save_sdf(const fs::path& path, const Field& sdf, double delta) {
    std::ofstream f = open_out(path);
    f.write("SDF1", 4);
    write_u32(f, uint32_t(sdf.width));
    write_u32(f, uint32_t(sdf.height));
    write_f32(f, float(delta));
    for (double v : sdf.values) write_f32(f, float(v));
    if (!f) throw io_error("write failed: " + path.string());
}

std::pair<Field, double> load_sdf(const fs::path& path) {
    std::ifstream f = open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "SDF1", 4) != 0)
        throw io_error("not an SDF1 raster: " + path.string());
    const uint32_t w = read_u32(f, path), h = read_u32(f, path);
    const float delta = read_f32(f, path);
    if (w < 1 || h < 1 || w > 1u << 20 || h > 1u << 20) throw io_error("bad SDF dimensions: " + path.string());
    Field out{int(w), int(h)};
    for (double& v : out.values) v = double(read_f32(f, path));
    return {std::move(out), double(delta)};
}

void save_checkpoint(const fs::path& path, const ScoreModel& model, const AdamState* adam) {
    std::ofstream f = open_out(path);
    f.write("SCM1", 4);
    const std::string desc = model.arch().canonical();
    write_u32(f, uint32_t(desc.size()));
    f.write(desc.data(), std::streamsize(desc.size()));
    write_u64(f, uint64_t(model.param_count()));
    f.write(reinterpret_cast<const char*>(model.params().data()),
            std::streamsize(model.param_count() * sizeof(double)));
    if (adam) {
        if (adam->first_moment.size() != model.param_count() ||
            adam->second_moment.size() != model.param_count())
            throw io_error("checkpoint: optimizer state length mismatch");
        for (const auto* vec : {&adam->first_moment, &adam->second_moment}) {
            write_u64(f, uint64_t(vec->size()));
            f.write(reinterpret_cast<const char*>(vec->data()),
                    std::streamsize(vec->size() * sizeof(double)));
        }
        write_u64(f, adam->step);
    }
    if (!f) throw io_error("write failed: " + path.string());
}

std::pair<ScoreModel, std::optional<AdamState>> load_checkpoint(const fs::path& path) {
    std::ifstream f = open_in(path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, "SCM1", 4) != 0)
        throw io_error("not an SCM1 checkpoint: " + path.string());
    const uint32_t desc_len = read_u32(f, path);
    if (desc_len > 1u << 16) throw io_error("unreasonable descriptor length: " + path.string());
    std::string desc(desc_len, '\0');
    if (!f.read(desc.data(), desc_len)) throw io_error("truncated file: " + path.string());
    ScoreModelArch arch = ScoreModelArch::parse(desc);
    const uint64_t n = read_u64(f, path);
    std::vector<double> params(n);
    if (!f.read(reinterpret_cast<char*>(params.data()), std::streamsize(n * sizeof(double))))
        throw io_error("truncated parameter block: " + path.string());
    ScoreModel model = ScoreModel::from_parts(arch, std::move(params));

    std::optional<AdamState> adam;
    if (f.peek() != EOF) {
        AdamState st;
        for (auto* vec : {&st.first_moment, &st.second_moment}) {
            const uint64_t len = read_u64(f, path);
            if (len != n) throw io_error("optimizer state length mismatch: " + path.string());
            vec->resize(len);
            if (!f.read(reinterpret_cast<char*>(vec->data()), std::streamsize(len * sizeof(double))))
                throw io_error("truncated optimizer state: " + path.string());
        }
        st.step = read_u64(f, path);
        adam = std::move(st);
    }
    return {std::move(model), std::move(adam)};
}

namespace {

std::string format_double_csv(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void save_loss_csv(const fs::path& path, const std::vector<double>& trace) {
    std::ofstream f = open_out(path);
    f << "step,loss\n";
    for (size_t i = 0; i < trace.size(); i++) f << i << "," << format_double_csv(trace[i]) << "\n";
    if (!f) throw io_error("write failed: " + path.string());
}

void save_metrics_csv(const fs::path& path, const std::vector<MetricRow>& rows) {
    std::ofstream f = open_out(path);
    f << "image_id,f1,iou\n";
    for (const MetricRow& r : rows)
        f << r.image_id << "," << format_double_csv(r.f1) << "," << format_double_csv(r.iou) << "\n";
    if (!f) throw io_error("write failed: " + path.string());
}

std::string sample_basename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05d", index);
    return buf;
}

void save_dataset(const fs::path& dir, const std::vector<SyntheticSample>& samples, int grid,
                  double delta, uint64_t seed, const std::string& config_text) {
    fs::create_directories(dir);
    for (size_t i = 0; i < samples.size(); i++) {
        const std::string base = sample_basename(int(i));
        save_mask_pgm(dir / (base + ".mask.pgm"), samples[i].mask);
        save_gray_pgm(dir / (base + ".img.pgm"), samples[i].image);
        save_sdf(dir / (base + ".sdf.bin"), samples[i].sdf, delta);
    }
    nlohmann::json manifest;
    manifest["n"] = samples.size();
    manifest["grid"] = grid;
    manifest["delta"] = delta;
    manifest["seed"] = seed;
    manifest["config_hash"] = fnv1a_hash(config_text);
    std::ofstream f = open_out(dir / "manifest.json");
    f << manifest.dump(2) << "\n";
}

std::vector<SyntheticSample> load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw io_error("dataset directory not found: " + dir.string());
    std::vector<SyntheticSample> out;
    for (int i = 0;; i++) {
        const std::string base = sample_basename(i);
        const fs::path mask_p = dir / (base + ".mask.pgm");
        if (!fs::exists(mask_p)) break;
        SyntheticSample s;
        s.seed = uint64_t(i);
        s.mask = load_mask_pgm(mask_p);
        s.image = load_gray_pgm(dir / (base + ".img.pgm"));
        s.sdf = load_sdf(dir / (base + ".sdf.bin")).first;
        if (!s.image.same_shape(s.sdf) || s.mask.width != s.sdf.width || s.mask.height != s.sdf.height)
            throw io_error("dataset sample has mismatched shapes: " + base);
        out.push_back(std::move(s));
    }
    return out;
}

void append_manifest_line(const fs::path& path, const std::string& json_line) {
    std::ofstream f(path, std::ios::binary | std::ios::app);
    if (!f) throw io_error("cannot open for appending: " + path.string());
    f << json_line << "\n";
}

uint64_t fnv1a_hash(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sdfscore
