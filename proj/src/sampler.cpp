#include "sdfscore/sampler.hpp"

#include <cmath>
#include <string>

namespace sdfscore {

namespace {

double l2_norm(const Field& f) {
    double acc = 0.0;
    for (double v : f.values) acc += v * v;
    return std::sqrt(acc);
}

void check_finite(const Field& f, const char* what, int level) {
    for (double v : f.values)
        if (!std::isfinite(v))
            throw numeric_error(std::string(what) + ": non-finite score at level " + std::to_string(level));
}

}  // namespace

Field predictor_step_with_noise(const Field& m_next, const ScoreFn& score_fn, const Field& x,
                                double sigma_next, double sigma_k, const Field& z) {
    if (sigma_next == sigma_k) return m_next;  // degenerate: zero coefficients
    if (!(sigma_next > sigma_k && sigma_k >= 0.0))
        throw config_error("predictor_step: need sigma_next >= sigma_k >= 0");
    const double var_gap = sigma_next * sigma_next - sigma_k * sigma_k;
    Field g = score_fn(m_next, x, sigma_next);
    require_same_shape(g, m_next, "predictor_step");
    check_finite(g, "predictor_step", -1);
    require_same_shape(z, m_next, "predictor_step noise");
    const double noise_scale = std::sqrt(var_gap);
    Field out = m_next;
    for (size_t i = 0; i < out.size(); i++)
        out.values[i] += var_gap * g.values[i] + noise_scale * z.values[i];
    return out;
}

Field predictor_step(const Field& m_next, const ScoreFn& score_fn, const Field& x,
                     double sigma_next, double sigma_k, Rng& rng) {
    Field z = rng.normal_field(m_next.width, m_next.height);
    return predictor_step_with_noise(m_next, score_fn, x, sigma_next, sigma_k, z);
}

double corrector_epsilon(double r, double z_norm, double g_norm) {
    const double ratio = r * z_norm / g_norm;
    return 2.0 * ratio * ratio;
}

Field corrector_step(const Field& m, const ScoreFn& score_fn, const Field& x, double sigma_k,
                     double r, Rng& rng, CorrectorStats* stats) {
    if (!(sigma_k > 0.0)) throw config_error("corrector_step: sigma_k must be > 0");
    if (!(r > 0.0)) throw config_error("corrector_step: r must be > 0");
    Field z = rng.normal_field(m.width, m.height);
    Field g = score_fn(m, x, sigma_k);
    require_same_shape(g, m, "corrector_step");
    check_finite(g, "corrector_step", -1);
    const double zn = l2_norm(z);
    const double gn = l2_norm(g);
    if (stats) {
        stats->z_norm = zn;
        stats->g_norm = gn;
    }
    if (gn == 0.0) {
        // degenerate zero score: the no-op limit
        if (stats) {
            stats->skipped = true;
            stats->eps = 0.0;
        }
        return m;
    }
    const double eps = corrector_epsilon(r, zn, gn);
    if (stats) {
        stats->skipped = false;
        stats->eps = eps;
    }
    const double noise_scale = std::sqrt(2.0 * eps);
    Field out = m;
    for (size_t i = 0; i < out.size(); i++)
        out.values[i] += eps * g.values[i] + noise_scale * z.values[i];
    return out;
}

Field sample(const ScoreFn& score_fn, const Field& x, const SigmaSchedule& sched,
             const SamplerConfig& cfg, Rng rng, int* zero_score_events) {
    sched.validate();
    cfg.validate();
    SigmaLadder ladder = make_ladder(sched, cfg.predictor_levels);

    Field m = rng.normal_field(x.width, x.height);
    for (double& v : m.values) v *= sched.sigma_max;

    int zero_events = 0;
    for (int k = int(ladder.size()) - 2; k >= 0; k--) {
        try {
            m = predictor_step(m, score_fn, x, ladder[k + 1], ladder[k], rng);
            for (int j = 0; j < cfg.corrector_steps; j++) {
                CorrectorStats st;
                m = corrector_step(m, score_fn, x, ladder[k], cfg.corrector_snr, rng, &st);
                if (st.skipped) zero_events++;
            }
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " (ladder level " + std::to_string(k) + ")");
        }
    }
    if (zero_score_events) *zero_score_events += zero_events;
    return m;
}

SampleEnsemble ensemble_sample(const ScoreFn& score_fn, const Field& x, const SigmaSchedule& sched,
                               const SamplerConfig& cfg, Rng master) {
    cfg.validate();
    const int R = cfg.ensemble_runs;
    SampleEnsemble ens;
    ens.samples.assign(R, Field());
    std::vector<int> zero_events(R, 0);
    std::vector<std::string> errors(R);

#pragma omp parallel for schedule(dynamic, 1)
    for (int j = 0; j < R; j++) {
        try {
            Rng stream = master.split(uint64_t(j));
            ens.samples[j] = sample(score_fn, x, sched, cfg, stream, &zero_events[j]);
        } catch (const std::exception& e) {
            errors[j] = e.what();
        }
    }
    for (int j = 0; j < R; j++)
        if (!errors[j].empty())
            throw numeric_error("ensemble run " + std::to_string(j) + ": " + errors[j]);

    for (int j = 0; j < R; j++) ens.zero_score_events += zero_events[j];

    ens.mean = Field(x.width, x.height);
    for (int j = 0; j < R; j++)
        for (size_t i = 0; i < ens.mean.size(); i++) ens.mean.values[i] += ens.samples[j].values[i];
    for (double& v : ens.mean.values) v /= R;

    ens.stddev = Field(x.width, x.height);
    for (int j = 0; j < R; j++)
        for (size_t i = 0; i < ens.stddev.size(); i++) {
            const double d = ens.samples[j].values[i] - ens.mean.values[i];
            ens.stddev.values[i] += d * d;
        }
    for (double& v : ens.stddev.values) v = std::sqrt(v / R);

    ens.mmse_mask = decode_mask(ens.mean, cfg.threshold_tau);
    return ens;
}

}  // namespace sdfscore
