#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdfscore/field.hpp"
#include "sdfscore/rng.hpp"
#include "sdfscore/score_model.hpp"
#include "sdfscore/sdf.hpp"
#include "sdfscore/sde.hpp"

namespace sdfscore {

enum class TargetMode { sdf, binary };

TargetMode parse_target_mode(const std::string& s);
std::string to_string(TargetMode m);

struct TrainConfig {
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 8;
    int total_steps = 20000;
    uint64_t seed = 0;
    TargetMode target_mode = TargetMode::sdf;
    double delta = 5.0;
    double sigma_min = 1e-3;
    double sigma_max = 5.0;
    bool augment_flips = true;

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("TrainConfig: learning_rate must be > 0");
        if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
        if (total_steps < 1) throw config_error("TrainConfig: total_steps must be >= 1");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
            throw config_error("TrainConfig: betas must lie in [0,1)");
        if (!(adam_eps > 0.0)) throw config_error("TrainConfig: adam_eps must be > 0");
    }

    SigmaSchedule schedule() const { return {sigma_min, sigma_max}; }
};

struct SyntheticSample {
    BinaryMask mask;
    Field sdf;
    Field image;
    uint64_t seed = 0;  // stream index under the generator's master seed
};

struct ShapeParams {
    int min_ellipses = 1;
    int max_ellipses = 4;
    double min_radius_frac = 0.08;
    double max_radius_frac = 0.28;

    void validate(int grid) const {
        if (min_ellipses < 1 || max_ellipses < min_ellipses)
            throw config_error("ShapeParams: ellipse counts out of range");
        if (!(min_radius_frac > 0.0 && max_radius_frac >= min_radius_frac))
            throw config_error("ShapeParams: radius fractions out of range");
        if (max_radius_frac * grid > grid / 2.0)
            throw config_error("ShapeParams: radii too large for the grid");
        if (min_radius_frac * grid < 1.0)
            throw config_error("ShapeParams: radii smaller than one pixel");
    }
};

// 1-4 random filled ellipses per mask; image = 0.7*mask + 0.2*smoothed noise
// + 0.1*background gradient, clamped to [0,1]. Deterministic given the rng.
std::vector<SyntheticSample> generate_synthetic(int n, int grid, const ShapeParams& shape,
                                                const SdfConfig& sdf_cfg, Rng rng);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    uint64_t step = 0;
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
               const TrainConfig& cfg);

using TrainCallback = std::function<void(int step, double loss)>;

struct TrainResult {
    std::vector<double> loss_trace;
    AdamState adam;
};

// Minibatch DSM optimization; in binary mode the target field is the mask
// remapped to {-1,+1} instead of the SDF map, everything else shared.
TrainResult train(const std::vector<SyntheticSample>& dataset, const TrainConfig& cfg,
                  ScoreModel& model, const TrainCallback& on_step = nullptr);

// {0,1} labels to {+1,-1} values (foreground negative, matching the SDF sign
// convention so decode_mask applies unchanged).
Field remap_binary(const BinaryMask& mask);

}  // namespace sdfscore
