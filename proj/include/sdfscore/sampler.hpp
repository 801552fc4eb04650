#pragma once

#include <functional>
#include <vector>

#include "sdfscore/field.hpp"
#include "sdfscore/rng.hpp"
#include "sdfscore/sde.hpp"
#include "sdfscore/sdf.hpp"

namespace sdfscore {

struct SamplerConfig {
    int predictor_levels = 200;   // K: sigma ladder length; K-1 reverse transitions
    int corrector_steps = 1;      // J: langevin steps per level
    double corrector_snr = 0.15;  // r: corrector step size scaling
    double threshold_tau = 3e-3;  // decode threshold, 3*sigma_min
    int ensemble_runs = 16;       // R

    void validate() const {
        if (predictor_levels < 2) throw config_error("SamplerConfig: need at least 2 predictor levels");
        if (corrector_steps < 0) throw config_error("SamplerConfig: corrector_steps must be >= 0");
        if (!(corrector_snr > 0.0)) throw config_error("SamplerConfig: corrector_snr must be > 0");
        if (!(threshold_tau >= 0.0)) throw config_error("SamplerConfig: threshold_tau must be >= 0");
        if (ensemble_runs < 1) throw config_error("SamplerConfig: ensemble_runs must be >= 1");
    }
};

using ScoreFn = std::function<Field(const Field& m, const Field& x, double sigma)>;

// Reverse-SDE transition from sigma_next down to sigma_k with explicit noise:
// m + (sigma_next^2 - sigma_k^2) * score(m, x, sigma_next) + sqrt(sigma_next^2 - sigma_k^2) * z
Field predictor_step_with_noise(const Field& m_next, const ScoreFn& score_fn, const Field& x,
                                double sigma_next, double sigma_k, const Field& z);

Field predictor_step(const Field& m_next, const ScoreFn& score_fn, const Field& x,
                     double sigma_next, double sigma_k, Rng& rng);

// eps = 2 (r |z| / |g|)^2
double corrector_epsilon(double r, double z_norm, double g_norm);

struct CorrectorStats {
    double eps = 0.0;
    double z_norm = 0.0;
    double g_norm = 0.0;
    bool skipped = false;  // |g| = 0 guard
};

// One langevin step m + eps*g + sqrt(2 eps) z; skips (returns m unchanged)
// when the score vanishes.
Field corrector_step(const Field& m, const ScoreFn& score_fn, const Field& x, double sigma_k,
                     double r, Rng& rng, CorrectorStats* stats = nullptr);

// Full predictor-corrector pass from N(0, sigma_max^2 I) down the ladder;
// returns the final field before thresholding.
Field sample(const ScoreFn& score_fn, const Field& x, const SigmaSchedule& sched,
             const SamplerConfig& cfg, Rng rng, int* zero_score_events = nullptr);

struct SampleEnsemble {
    std::vector<Field> samples;
    Field mean;
    Field stddev;  // population convention (divide by R)
    BinaryMask mmse_mask;
    int zero_score_events = 0;
};

// R independent runs on split RNG streams; mean/std per pixel; the MMSE mask
// thresholds the mean, strictly after averaging.
SampleEnsemble ensemble_sample(const ScoreFn& score_fn, const Field& x, const SigmaSchedule& sched,
                               const SamplerConfig& cfg, Rng master);

}  // namespace sdfscore
