#include "sdfscore/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdfscore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Finite sentinel for unseeded pixels inside the transform; a true infinity
// would produce inf-inf = NaN in the envelope intersections.
constexpr double kBig = 1e20;

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas), after Felzenszwalb & Huttenlocher. Seed values in f are exact
// integers or +inf, so envelope decisions at integer query points are exact
// in double precision and the output squared distances are exact integers.
void dt_1d(const double* f, int n, double* d, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; q++) {
        double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            k--;
            s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        k++;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; q++) {
        while (z[k + 1] < q) k++;
        double dq = double(q) - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

bool off_grid_or_background(const BinaryMask& m, int y, int x) {
    if (x < 0 || y < 0 || x >= m.width || y >= m.height) return true;
    return m.at(y, x) == 0;
}

// Shared clamp-sign-normalize step; both encode paths reproduce it
// independently so results stay bitwise comparable.
inline double sdf_value(double dist, double delta, bool foreground) {
    if (dist == 0.0) return 0.0;  // boundary pixels, exact zero
    double v = std::min(dist, delta) / delta;
    return foreground ? -v : v;
}

}  // namespace

std::vector<PixelCoord> boundary_pixels(const BinaryMask& mask) {
    validate_mask(mask);
    std::vector<PixelCoord> out;
    for (int y = 0; y < mask.height; y++) {
        for (int x = 0; x < mask.width; x++) {
            if (mask.at(y, x) != 1) continue;
            if (off_grid_or_background(mask, y - 1, x) || off_grid_or_background(mask, y + 1, x) ||
                off_grid_or_background(mask, y, x - 1) || off_grid_or_background(mask, y, x + 1)) {
                out.push_back({x, y});
            }
        }
    }
    return out;
}

Field boundary_distance_sq(const BinaryMask& mask) {
    validate_mask(mask);
    const int w = mask.width, h = mask.height;
    std::vector<PixelCoord> boundary = boundary_pixels(mask);
    if (boundary.empty()) return Field(w, h, kInf);

    Field dsq(w, h, kBig);
    for (const PixelCoord& p : boundary) dsq.at(p.y, p.x) = 0.0;

    const int n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);

    // columns
    for (int x = 0; x < w; x++) {
        for (int y = 0; y < h; y++) f[y] = dsq.at(y, x);
        dt_1d(f.data(), h, d.data(), v.data(), z.data());
        for (int y = 0; y < h; y++) dsq.at(y, x) = d[y];
    }
    // rows
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) f[x] = dsq.at(y, x);
        dt_1d(f.data(), w, d.data(), v.data(), z.data());
        for (int x = 0; x < w; x++) dsq.at(y, x) = d[x];
    }
    return dsq;
}

Field encode_sdf(const BinaryMask& mask, const SdfConfig& cfg) {
    validate_mask(mask);
    cfg.validate();
    Field out(mask.width, mask.height);
    Field dsq = boundary_distance_sq(mask);
    if (std::isinf(dsq.values[0])) {
        // no boundary: uniformly background or uniformly foreground
        double fill = (mask.labels[0] == 1) ? -1.0 : 1.0;
        std::fill(out.values.begin(), out.values.end(), fill);
        return out;
    }
    for (size_t i = 0; i < out.size(); i++) {
        out.values[i] = sdf_value(std::sqrt(dsq.values[i]), cfg.delta, mask.labels[i] == 1);
    }
    return out;
}

Field brute_force_sdf(const BinaryMask& mask, const SdfConfig& cfg) {
    validate_mask(mask);
    cfg.validate();
    Field out(mask.width, mask.height);
    std::vector<PixelCoord> boundary = boundary_pixels(mask);
    if (boundary.empty()) {
        double fill = (mask.labels[0] == 1) ? -1.0 : 1.0;
        std::fill(out.values.begin(), out.values.end(), fill);
        return out;
    }
    for (int y = 0; y < mask.height; y++) {
        for (int x = 0; x < mask.width; x++) {
            double best = kInf;
            for (const PixelCoord& b : boundary) {
                double dx = double(x) - b.x;
                double dy = double(y) - b.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            double dist = std::sqrt(best);
            double v = std::min(dist, cfg.delta) / cfg.delta;
            if (dist == 0.0)
                out.at(y, x) = 0.0;
            else
                out.at(y, x) = (mask.at(y, x) == 1) ? -v : v;
        }
    }
    return out;
}

BinaryMask decode_mask(const Field& sdf, double tau) {
    if (sdf.width < 1 || sdf.height < 1) throw shape_error("decode_mask: empty field");
    if (!(tau >= 0.0)) throw config_error("decode_mask: tau must be >= 0");
    BinaryMask m(sdf.width, sdf.height);
    for (size_t i = 0; i < sdf.size(); i++) m.labels[i] = sdf.values[i] <= tau ? 1 : 0;
    return m;
}

}  // namespace sdfscore
