#pragma once

#include <cstdint>
#include <string>

#include "sdfscore/sampler.hpp"
#include "sdfscore/sde.hpp"
#include "sdfscore/sdf.hpp"
#include "sdfscore/training.hpp"

namespace sdfscore {

// Flat `key = value` document (UTF-8, '#' comments). Unknown keys are
// rejected; numeric ranges are validated on load; serialization emits the
// canonical form (fixed key order) so parse-serialize-parse is the identity.
struct RunConfig {
    double sigma_min = 1e-3;
    double sigma_max = 5.0;
    double delta = 0.0;  // 0 = resolve from grid size (10 at >=64, else 5)
    double threshold_tau = 3e-3;

    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 8;
    int total_steps = 20000;
    std::string target_mode = "sdf";
    int base_channels = 32;
    int checkpoint_every = 1000;
    bool augment_flips = true;

    int grid = 32;
    int n_samples = 100;
    int min_ellipses = 1;
    int max_ellipses = 4;
    double min_radius_frac = 0.08;
    double max_radius_frac = 0.28;

    int predictor_steps = 200;
    int corrector_steps = 1;
    double corrector_snr = 0.15;
    int ensemble_runs = 16;
    std::string score_precision = "f32";

    int band = 3;
    uint64_t seed = 0;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);
    std::string serialize() const;
    void validate() const;

    double resolved_delta(int grid_w, int grid_h) const {
        return delta > 0.0 ? delta : default_delta(grid_w, grid_h);
    }

    SigmaSchedule schedule() const { return {sigma_min, sigma_max}; }
    SdfConfig sdf_config(int grid_w, int grid_h) const {
        return {resolved_delta(grid_w, grid_h), threshold_tau};
    }
    SamplerConfig sampler_config() const {
        return {predictor_steps, corrector_steps, corrector_snr, threshold_tau, ensemble_runs};
    }
    TrainConfig train_config(int grid_w, int grid_h) const;
    ShapeParams shape_params() const {
        return {min_ellipses, max_ellipses, min_radius_frac, max_radius_frac};
    }
};

}  // namespace sdfscore
