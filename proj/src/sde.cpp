#include "sdfscore/sde.hpp"

#include <cmath>

namespace sdfscore {

double SigmaSchedule::sigma_at(double t) const {
    validate();
    if (!(t >= 0.0 && t <= 1.0)) throw config_error("sigma_at: t must lie in [0,1]");
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

SigmaLadder make_ladder(const SigmaSchedule& sched, int levels) {
    sched.validate();
    if (levels < 2) throw config_error("make_ladder: need at least 2 levels");
    SigmaLadder sigmas(levels);
    for (int k = 0; k < levels; k++) sigmas[k] = sched.sigma_at(double(k) / (levels - 1));
    sigmas.front() = sched.sigma_min;
    sigmas.back() = sched.sigma_max;
    return sigmas;
}

Field perturb(const Field& m0, double sigma, const Field& z) {
    require_same_shape(m0, z, "perturb");
    Field out = m0;
    for (size_t i = 0; i < out.size(); i++) out.values[i] += sigma * z.values[i];
    return out;
}

Field dsm_target(const Field& mt, const Field& m0, double sigma) {
    require_same_shape(mt, m0, "dsm_target");
    if (!(sigma > 0.0)) throw numeric_error("dsm_target: sigma must be > 0");
    const double inv = 1.0 / (sigma * sigma);
    Field out = mt;
    for (size_t i = 0; i < out.size(); i++) out.values[i] = -(mt.values[i] - m0.values[i]) * inv;
    return out;
}

double dsm_loss(const Field& score, const Field& target, double sigma) {
    require_same_shape(score, target, "dsm_loss");
    if (!(sigma > 0.0)) throw numeric_error("dsm_loss: sigma must be > 0");
    double acc = 0.0;
    for (size_t i = 0; i < score.size(); i++) {
        const double r = score.values[i] - target.values[i];
        acc += r * r;
    }
    return sigma * sigma * acc / double(score.size());
}

}  // namespace sdfscore
