#include "cacnet/agatston.hpp"

#include <algorithm>
#include <cmath>

namespace cacnet {

const char* category_display_name(CacCategory c) {
    switch (c) {
        case CacCategory::VeryLow: return "Very Low Risk";
        case CacCategory::Low: return "Low Risk";
        case CacCategory::LowModerate: return "Low/Moderate Risk";
        case CacCategory::Moderate: return "Moderate Risk";
        case CacCategory::ModerateHigh: return "Moderate/High Risk";
        case CacCategory::High: return "High Risk";
    }
    throw DataError("invalid category value");
}

CacCategory categorize(double score) {
    if (!(score >= 0.0)) throw DataError("Agatston score must be >= 0, got " + std::to_string(score));
    if (score == 0.0) return CacCategory::VeryLow;
    if (score <= 10.0) return CacCategory::Low;
    if (score <= 100.0) return CacCategory::LowModerate;
    if (score <= 400.0) return CacCategory::Moderate;
    if (score <= 1000.0) return CacCategory::ModerateHigh;
    return CacCategory::High;
}

int density_weight(int peak_hu) {
    if (peak_hu < 200) return 1;
    if (peak_hu < 300) return 2;
    if (peak_hu < 400) return 3;
    return 4;
}

std::vector<std::uint8_t> threshold_mask(const std::int16_t* hu, std::size_t count, int threshold) {
    std::vector<std::uint8_t> mask(count);
    for (std::size_t i = 0; i < count; ++i) mask[i] = hu[i] >= threshold ? 1 : 0;
    return mask;
}

std::vector<std::vector<std::pair<std::size_t, std::size_t>>> connected_components_2d(
    const std::vector<std::uint8_t>& mask, std::size_t h, std::size_t w) {
    if (mask.size() != h * w) {
        throw DimensionError("mask size " + std::to_string(mask.size()) + " != " + std::to_string(h) + "x" +
                             std::to_string(w));
    }
    std::vector<std::uint8_t> seen(h * w, 0);
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> comps;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || seen[start]) continue;
        std::vector<std::pair<std::size_t, std::size_t>> comp;
        seen[start] = 1;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const std::size_t y = p / w, x = p % w;
            comp.emplace_back(y, x);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + dy;
                    const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
                        nx >= static_cast<std::ptrdiff_t>(w)) {
                        continue;
                    }
                    const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (mask[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        comps.push_back(std::move(comp));
    }
    auto key = [](const std::vector<std::pair<std::size_t, std::size_t>>& comp) {
        std::size_t min_row = comp[0].first, min_col = comp[0].second;
        for (const auto& [y, x] : comp) {
            min_row = std::min(min_row, y);
            min_col = std::min(min_col, x);
        }
        return std::pair{min_row, min_col};
    };
    std::stable_sort(comps.begin(), comps.end(),
                     [&key](const auto& a, const auto& b) { return key(a) < key(b); });
    return comps;
}

SliceScore agatston_slice_score(const std::int16_t* hu, std::size_t h, std::size_t w, double spacing_y_mm,
                                double spacing_x_mm, std::size_t slice_index, const Roi& roi) {
    if (spacing_y_mm <= 0.0 || spacing_x_mm <= 0.0) throw DataError("pixel spacing must be positive");
    std::vector<std::uint8_t> mask(h * w, 0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            mask[y * w + x] = (hu[y * w + x] >= kCalciumThresholdHu && roi.contains(y, x)) ? 1 : 0;
        }
    }
    SliceScore out;
    out.slice_index = slice_index;
    const double pixel_area = spacing_y_mm * spacing_x_mm;
    for (auto& comp : connected_components_2d(mask, h, w)) {
        const double area = static_cast<double>(comp.size()) * pixel_area;
        if (area < kMinLesionAreaMm2) continue;
        Lesion lesion;
        lesion.slice_index = slice_index;
        lesion.area_mm2 = area;
        lesion.peak_hu = hu[comp[0].first * w + comp[0].second];
        for (const auto& [y, x] : comp) lesion.peak_hu = std::max(lesion.peak_hu, static_cast<int>(hu[y * w + x]));
        lesion.score = area * density_weight(lesion.peak_hu);
        lesion.pixels = std::move(comp);
        out.score += lesion.score;
        out.lesions.push_back(std::move(lesion));
    }
    return out;
}

StudyScore agatston_study_score(const StudyVolume& vol, const Roi& roi) {
    vol.validate();
    StudyScore out;
    out.slices.resize(vol.z);
#pragma omp parallel for schedule(static) if (vol.z > 1)
    for (std::size_t zi = 0; zi < vol.z; ++zi) {
        out.slices[zi] = agatston_slice_score(vol.slice(zi), vol.h, vol.w, vol.spacing_y_mm, vol.spacing_x_mm, zi, roi);
    }
    for (const auto& s : out.slices) out.total += s.score;
    return out;
}

}  // namespace cacnet
