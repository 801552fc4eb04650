#pragma once

#include <span>
#include <string>
#include <vector>

#include "sdfscore/field.hpp"
#include "sdfscore/rng.hpp"
#include "sdfscore/sde.hpp"

namespace sdfscore {

// Fixed topology, parameterized widths: conditional encoder-decoder over
// concat(m, x) with one residual block per resolution, stride-2 descent to
// a half-resolution stage, nearest-neighbor ascent with skip concat, and a
// sigma embedding (fourier features of log sigma) driving per-channel
// scale-and-shift after each residual block. The network predicts a noise
// estimate zhat; the score is -zhat/sigma.
struct ScoreModelArch {
    int base_channels = 32;  // full-resolution width; half resolution uses 2x
    int embed_freqs = 16;
    int embed_hidden = 64;
    double sigma_min = 1e-3;
    double sigma_max = 5.0;

    void validate() const;
    std::string canonical() const;
    static ScoreModelArch parse(const std::string& text);
    bool operator==(const ScoreModelArch&) const = default;
};

struct ParamSlot {
    std::string name;
    size_t offset = 0;
    size_t count = 0;
};

class ScoreModel {
public:
    ScoreModel() = default;

    // Scaled-normal init for hidden layers, zeros for the output head and
    // the modulation heads (identity modulation at init).
    static ScoreModel create(const ScoreModelArch& arch, Rng& rng);

    // Every tensor random; used by gradient checks where a zero head would
    // zero out upstream gradients.
    static ScoreModel create_fully_random(const ScoreModelArch& arch, Rng& rng);

    const ScoreModelArch& arch() const { return arch_; }
    const std::vector<ParamSlot>& slots() const { return slots_; }
    size_t param_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // Conditional score s(mt, x, sigma) = -zhat/sigma. Deterministic.
    Field apply(const Field& mt, const Field& x, double sigma) const;

    // The raw noise estimate zhat (same forward pass as apply).
    Field noise_estimate(const Field& mt, const Field& x, double sigma) const;

    static ScoreModel from_parts(const ScoreModelArch& arch, std::vector<double> params);

private:
    ScoreModelArch arch_;
    std::vector<ParamSlot> slots_;
    std::vector<double> params_;
};

// Single-precision snapshot of a model for fast sampling; inputs/outputs
// stay double, the internal pass runs in float.
class FloatScoreNet {
public:
    explicit FloatScoreNet(const ScoreModel& model);
    Field apply(const Field& mt, const Field& x, double sigma) const;

private:
    ScoreModelArch arch_;
    std::vector<float> params_;
};

struct TrainPair {
    const Field* target = nullptr;  // m0: SDF map, or remapped binary mask in ablation mode
    const Field* image = nullptr;   // conditioning image x
};

struct DsmResult {
    double loss = 0.0;
    std::vector<double> grad;
};

// Denoising score matching objective: per item draw t ~ U(0,1) and a
// gaussian field z, form mt = m0 + sigma(t) z and average
// sigma^2(t) * |s(mt,x,sigma) - dsm_target(mt,m0,sigma)|^2 over batch and
// pixels. Returns the loss and its exact parameter gradient.
DsmResult loss_and_gradients(const ScoreModel& model, std::span<const TrainPair> batch,
                             const SigmaSchedule& sched, Rng rng);

// Closed-form score of N(mu, s2*I) convolved with N(0, sigma^2*I); used to
// validate the sampler without a trained network.
struct AnalyticGaussianScore {
    Field mu;
    double s2 = 1.0;

    Field score(const Field& mt, double sigma) const {
        if (!(s2 > 0.0)) throw config_error("AnalyticGaussianScore: s2 must be > 0");
        require_same_shape(mt, mu, "analytic_score");
        Field out = mt;
        const double inv = 1.0 / (s2 + sigma * sigma);
        for (size_t i = 0; i < out.size(); i++) out.values[i] = -(mt.values[i] - mu.values[i]) * inv;
        return out;
    }
};

}  // namespace sdfscore
