#pragma once

#include <utility>
#include <vector>

#include "sdfscore/field.hpp"

namespace sdfscore {

struct SdfConfig {
    double delta = 5.0;           // truncation distance in pixels
    double threshold_tau = 3e-3;  // decode threshold in normalized units (3*sigma_min)

    void validate() const {
        if (!(delta > 0.0)) throw config_error("SdfConfig: delta must be > 0");
        if (!(threshold_tau >= 0.0)) throw config_error("SdfConfig: threshold_tau must be >= 0");
    }
};

// Truncation default: several pixels around the object boundary, wider on
// larger grids.
inline double default_delta(int width, int height) {
    return (width >= 64 && height >= 64) ? 10.0 : 5.0;
}

struct PixelCoord {
    int x = 0;
    int y = 0;
    bool operator==(const PixelCoord&) const = default;
};

// Foreground pixels with at least one 4-connected background (or off-grid)
// neighbor. These belong to the object and carry SDF value exactly 0.
std::vector<PixelCoord> boundary_pixels(const BinaryMask& mask);

// Exact squared Euclidean distance to the nearest boundary pixel, per pixel.
// Infinite (std::numeric_limits<double>::infinity()) when the boundary set
// is empty. Two-pass lower-envelope transform, O(width*height).
Field boundary_distance_sq(const BinaryMask& mask);

// Truncated, normalized signed distance field: -min(d,delta)/delta inside
// the object, +min(d,delta)/delta outside, exactly 0 on the boundary.
// Degenerate masks without a boundary map to uniform +1 (all background)
// or -1 (all foreground).
Field encode_sdf(const BinaryMask& mask, const SdfConfig& cfg);

// Same contract as encode_sdf, evaluated by exhaustive minimization over
// the boundary set. Test oracle; O(width*height*|boundary|).
Field brute_force_sdf(const BinaryMask& mask, const SdfConfig& cfg);

// Foreground iff value <= tau.
BinaryMask decode_mask(const Field& sdf, double tau);

}  // namespace sdfscore
