#pragma once

#include <vector>

#include "sdfscore/field.hpp"

namespace sdfscore {

// Variance-exploding noise schedule sigma(t) = sigma_min * (sigma_max/sigma_min)^t
// on t in [0,1].
struct SigmaSchedule {
    double sigma_min = 1e-3;
    double sigma_max = 5.0;

    void validate() const {
        if (!(sigma_min > 0.0 && sigma_min < sigma_max))
            throw config_error("SigmaSchedule: need 0 < sigma_min < sigma_max");
    }

    double sigma_at(double t) const;
};

// Geometric ladder sigma_0 = sigma_min < ... < sigma_{K-1} = sigma_max.
using SigmaLadder = std::vector<double>;

SigmaLadder make_ladder(const SigmaSchedule& sched, int levels);

// m0 + sigma * z. Values may leave [-1,1]; perturbed fields are
// unconstrained reals.
Field perturb(const Field& m0, double sigma, const Field& z);

// Exact score of the gaussian perturbation kernel: -(mt - m0) / sigma^2.
Field dsm_target(const Field& mt, const Field& m0, double sigma);

// Per-item DSM objective: sigma^2 * mean((score - target)^2) over pixels.
double dsm_loss(const Field& score, const Field& target, double sigma);

}  // namespace sdfscore
