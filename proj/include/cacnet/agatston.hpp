#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cacnet/volume.hpp"

// Reference semiautomatic Agatston scorer: 130 HU threshold, per-slice
// 8-connected lesions, 1 mm^2 minimum lesion area, density weights 1..4 by
// peak HU, and the six-class risk categorization used as the label oracle.

namespace cacnet {

inline constexpr int kCalciumThresholdHu = 130;
inline constexpr double kMinLesionAreaMm2 = 1.0;

enum class CacCategory : int {
    VeryLow = 0,
    Low = 1,
    LowModerate = 2,
    Moderate = 3,
    ModerateHigh = 4,
    High = 5,
};

inline constexpr int kNumCategories = 6;

const char* category_display_name(CacCategory c);

// Bins: {0}, (0,10], (10,100], (100,400], (400,1000], (1000,inf).
CacCategory categorize(double score);

// Density weight by lesion peak HU: [130,200) -> 1, [200,300) -> 2,
// [300,400) -> 3, >= 400 -> 4.
int density_weight(int peak_hu);

struct Lesion {
    std::size_t slice_index = 0;
    std::vector<std::pair<std::size_t, std::size_t>> pixels;  // (y, x)
    double area_mm2 = 0.0;
    int peak_hu = 0;
    double score = 0.0;
};

std::vector<std::uint8_t> threshold_mask(const std::int16_t* hu, std::size_t count, int threshold = kCalciumThresholdHu);

// 8-connected components of a binary h x w mask, ordered by
// (min row, min col) over each component's pixels.
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> connected_components_2d(
    const std::vector<std::uint8_t>& mask, std::size_t h, std::size_t w);

struct SliceScore {
    std::size_t slice_index = 0;
    double score = 0.0;
    std::vector<Lesion> lesions;
};

// Scores one slice; an ROI restricts which pixels participate at all
// (pixels outside it are treated as below threshold).
SliceScore agatston_slice_score(const std::int16_t* hu, std::size_t h, std::size_t w, double spacing_y_mm,
                                double spacing_x_mm, std::size_t slice_index = 0, const Roi& roi = Roi{});

struct StudyScore {
    double total = 0.0;
    std::vector<SliceScore> slices;
};

// Per-slice scores summed in slice order; no inter-slice merging.
StudyScore agatston_study_score(const StudyVolume& vol, const Roi& roi = Roi{});

}  // namespace cacnet
