#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sdfscore/errors.hpp"

namespace sdfscore {

// Row-major real-valued raster. One type serves SDF maps, conditioning
// images, gaussian fields, score fields and perturbed fields; the value
// range depends on the role (SDF maps live in [-1,1], perturbed fields are
// unconstrained).
struct Field {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Field() = default;
    Field(int w, int h, double fill = 0.0) : width(w), height(h) {
        if (w < 1 || h < 1) throw shape_error("Field dimensions must be at least 1x1");
        values.assign(static_cast<size_t>(w) * h, fill);
    }

    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return values.size(); }
    bool same_shape(const Field& o) const { return width == o.width && height == o.height; }
};

// Per-pixel {0,1} labels, 1 = foreground object, 0 = background, row-major.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> labels;

    BinaryMask() = default;
    BinaryMask(int w, int h, uint8_t fill = 0) : width(w), height(h) {
        if (w < 1 || h < 1) throw shape_error("BinaryMask dimensions must be at least 1x1");
        labels.assign(static_cast<size_t>(w) * h, fill);
    }

    uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return labels.size(); }
    bool same_shape(const BinaryMask& o) const { return width == o.width && height == o.height; }

    bool operator==(const BinaryMask& o) const {
        return width == o.width && height == o.height && labels == o.labels;
    }
};

inline void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (!a.same_shape(b)) throw shape_error(std::string(what) + ": field shapes differ");
}

inline void validate_mask(const BinaryMask& m) {
    if (m.width < 1 || m.height < 1) throw shape_error("mask dimensions must be at least 1x1");
    if (m.labels.size() != static_cast<size_t>(m.width) * m.height)
        throw shape_error("mask label count does not match dimensions");
    for (uint8_t v : m.labels)
        if (v > 1) throw shape_error("mask labels must be 0 or 1");
}

}  // namespace sdfscore
