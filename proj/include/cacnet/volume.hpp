#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cacnet/errors.hpp"

namespace cacnet {

// Axis-aligned in-plane rectangle; h == 0 or w == 0 means "whole slice".
struct Roi {
    std::size_t y = 0;
    std::size_t x = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    bool whole_slice() const { return h == 0 || w == 0; }
    bool contains(std::size_t yy, std::size_t xx) const {
        return whole_slice() || (yy >= y && yy < y + h && xx >= x && xx < x + w);
    }
};

// One patient's HU voxel grid in (z, y, x) order plus acquisition geometry.
struct StudyVolume {
    std::string study_id;
    std::size_t z = 0, h = 0, w = 0;
    double spacing_y_mm = 0.5;
    double spacing_x_mm = 0.5;
    double slice_thickness_mm = 3.0;
    std::vector<std::int16_t> voxels;
    Roi cardiac_roi;

    const std::int16_t* slice(std::size_t zi) const { return voxels.data() + zi * h * w; }
    std::int16_t* slice(std::size_t zi) { return voxels.data() + zi * h * w; }
    std::int16_t hu(std::size_t zi, std::size_t yi, std::size_t xi) const { return voxels[(zi * h + yi) * w + xi]; }

    void validate() const {
        if (z == 0 || h == 0 || w == 0) throw DataError("volume " + study_id + " has empty dimensions");
        if (voxels.size() != z * h * w) {
            throw DataError("volume " + study_id + " voxel count " + std::to_string(voxels.size()) +
                            " does not match dims " + std::to_string(z) + "x" + std::to_string(h) + "x" +
                            std::to_string(w));
        }
        if (spacing_y_mm <= 0.0 || spacing_x_mm <= 0.0) throw DataError("pixel spacing must be positive");
    }
};

}  // namespace cacnet
