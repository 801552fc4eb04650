#include "sdfscore/training.hpp"

#include <algorithm>
#include <cmath>

namespace sdfscore {

TargetMode parse_target_mode(const std::string& s) {
    if (s == "sdf") return TargetMode::sdf;
    if (s == "binary") return TargetMode::binary;
    throw config_error("target_mode must be 'sdf' or 'binary', got '" + s + "'");
}

std::string to_string(TargetMode m) { return m == TargetMode::sdf ? "sdf" : "binary"; }

namespace {

void box_blur3(Field& f) {
    Field src = f;
    for (int y = 0; y < f.height; y++) {
        for (int x = 0; x < f.width; x++) {
            double acc = 0.0;
            int cnt = 0;
            for (int dy = -1; dy <= 1; dy++) {
                for (int dx = -1; dx <= 1; dx++) {
                    int yy = y + dy, xx = x + dx;
                    if (yy < 0 || xx < 0 || yy >= f.height || xx >= f.width) continue;
                    acc += src.at(yy, xx);
                    cnt++;
                }
            }
            f.at(y, x) = acc / cnt;
        }
    }
}

void rasterize_ellipse(BinaryMask& mask, double cx, double cy, double a, double b, double theta) {
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < mask.height; y++) {
        for (int x = 0; x < mask.width; x++) {
            const double dx = x - cx, dy = y - cy;
            const double u = (dx * ct + dy * st) / a;
            const double v = (-dx * st + dy * ct) / b;
            if (u * u + v * v <= 1.0) mask.at(y, x) = 1;
        }
    }
}

}  // namespace

std::vector<SyntheticSample> generate_synthetic(int n, int grid, const ShapeParams& shape,
                                                const SdfConfig& sdf_cfg, Rng rng) {
    if (n < 0) throw config_error("generate_synthetic: n must be >= 0");
    if (grid < 16 || grid > 128 || grid % 2 != 0)
        throw config_error("generate_synthetic: grid must be even and within [16,128]");
    shape.validate(grid);
    sdf_cfg.validate();

    std::vector<SyntheticSample> out;
    out.reserve(n);
    for (int i = 0; i < n; i++) {
        Rng r = rng.split(uint64_t(i));
        SyntheticSample s;
        s.seed = uint64_t(i);
        s.mask = BinaryMask(grid, grid);

        const int span = shape.max_ellipses - shape.min_ellipses + 1;
        const int count = shape.min_ellipses + int(r.next_u64() % uint64_t(span));
        const double rmin = shape.min_radius_frac * grid;
        const double rmax = shape.max_radius_frac * grid;
        for (int e = 0; e < count; e++) {
            const double cx = r.uniform01() * (grid - 1);
            const double cy = r.uniform01() * (grid - 1);
            const double a = rmin + r.uniform01() * (rmax - rmin);
            const double b = rmin + r.uniform01() * (rmax - rmin);
            const double theta = r.uniform01() * 3.14159265358979323846;
            rasterize_ellipse(s.mask, cx, cy, a, b, theta);
        }

        s.sdf = encode_sdf(s.mask, sdf_cfg);

        Field noise(grid, grid);
        for (double& v : noise.values) v = r.uniform01();
        box_blur3(noise);
        box_blur3(noise);

        const double phi = r.uniform01() * 2.0 * 3.14159265358979323846;
        Field grad(grid, grid);
        double gmin = 1e300, gmax = -1e300;
        for (int y = 0; y < grid; y++) {
            for (int x = 0; x < grid; x++) {
                const double g = std::cos(phi) * (double(x) / (grid - 1)) +
                                 std::sin(phi) * (double(y) / (grid - 1));
                grad.at(y, x) = g;
                gmin = std::min(gmin, g);
                gmax = std::max(gmax, g);
            }
        }
        const double gspan = gmax - gmin;
        for (double& v : grad.values) v = gspan > 0.0 ? (v - gmin) / gspan : 0.5;

        s.image = Field(grid, grid);
        for (size_t p = 0; p < s.image.size(); p++) {
            double v = 0.7 * s.mask.labels[p] + 0.2 * noise.values[p] + 0.1 * grad.values[p];
            s.image.values[p] = std::clamp(v, 0.0, 1.0);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.size()) throw shape_error("adam_step: params/grads length mismatch");
    if (state.first_moment.empty()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    if (state.first_moment.size() != params.size())
        throw shape_error("adam_step: optimizer state length mismatch");
    for (double g : grads)
        if (!std::isfinite(g)) throw numeric_error("adam_step: non-finite gradient");

    state.step++;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, double(state.step));
    const double c2 = 1.0 - std::pow(b2, double(state.step));
    for (size_t i = 0; i < params.size(); i++) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = b1 * m + (1.0 - b1) * grads[i];
        v = b2 * v + (1.0 - b2) * grads[i] * grads[i];
        const double mhat = m / c1;
        const double vhat = v / c2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

Field remap_binary(const BinaryMask& mask) {
    validate_mask(mask);
    Field f(mask.width, mask.height);
    for (size_t i = 0; i < f.size(); i++) f.values[i] = 1.0 - 2.0 * mask.labels[i];
    return f;
}

namespace {

Field flip_field(const Field& f, bool hflip, bool vflip) {
    if (!hflip && !vflip) return f;
    Field out(f.width, f.height);
    for (int y = 0; y < f.height; y++) {
        const int sy = vflip ? f.height - 1 - y : y;
        for (int x = 0; x < f.width; x++) {
            const int sx = hflip ? f.width - 1 - x : x;
            out.at(y, x) = f.at(sy, sx);
        }
    }
    return out;
}

}  // namespace

TrainResult train(const std::vector<SyntheticSample>& dataset, const TrainConfig& cfg,
                  ScoreModel& model, const TrainCallback& on_step) {
    cfg.validate();
    if (dataset.empty()) throw config_error("train: dataset is empty");

    // one parameterized pipeline: binary mode only swaps the target field
    std::vector<Field> targets(dataset.size());
    for (size_t i = 0; i < dataset.size(); i++)
        targets[i] = cfg.target_mode == TargetMode::sdf ? dataset[i].sdf : remap_binary(dataset[i].mask);

    const SigmaSchedule sched = cfg.schedule();
    Rng run_rng(cfg.seed);

    TrainResult res;
    res.loss_trace.reserve(cfg.total_steps);

    std::vector<Field> batch_targets(cfg.batch_size), batch_images(cfg.batch_size);
    std::vector<TrainPair> batch(cfg.batch_size);

    for (int step = 0; step < cfg.total_steps; step++) {
        Rng step_rng = run_rng.split(uint64_t(step));
        Rng pick_rng = step_rng.split(0);
        Rng loss_rng = step_rng.split(1);

        for (int b = 0; b < cfg.batch_size; b++) {
            const size_t idx = size_t(pick_rng.next_u64() % dataset.size());
            bool hflip = false, vflip = false;
            if (cfg.augment_flips) {
                hflip = (pick_rng.next_u64() & 1) != 0;
                vflip = (pick_rng.next_u64() & 1) != 0;
            }
            batch_targets[b] = flip_field(targets[idx], hflip, vflip);
            batch_images[b] = flip_field(dataset[idx].image, hflip, vflip);
            batch[b] = {&batch_targets[b], &batch_images[b]};
        }

        DsmResult r;
        try {
            r = loss_and_gradients(model, batch, sched, loss_rng);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " (training step " + std::to_string(step) + ")");
        }
        adam_step(model.params(), r.grad, res.adam, cfg);
        res.loss_trace.push_back(r.loss);
        if (on_step) on_step(step, r.loss);
    }
    return res;
}

}  // namespace sdfscore
