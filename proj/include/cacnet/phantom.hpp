#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cacnet/agatston.hpp"
#include "cacnet/data.hpp"
#include "cacnet/volume.hpp"

// Seeded synthetic cardiac-CT generator. Every phantom carries an exactly
// known Agatston score: lesions are axis-aligned constant-HU rectangles, so
// score = pixel_count * spacing^2 * density_weight per lesion, by hand.
// Optional bone-like ellipse distractors sit outside the declared cardiac
// ROI and reproduce the whole-slice-vs-ROI score bias in controlled form.

namespace cacnet {

struct PhantomSpec {
    CacCategory target_category = CacCategory::VeryLow;
    std::size_t slices = 0;  // 0: sample uniformly from [56, 96]
    std::size_t height = kInputSize;
    std::size_t width = kInputSize;
    double spacing_y_mm = 0.5;
    double spacing_x_mm = 0.5;
    bool include_bone_distractors = false;
    double noise_std_hu = 15.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PlantedLesion {
    std::size_t slice_index = 0;
    std::size_t y = 0, x = 0, h = 0, w = 0;
    int hu = 0;
    double area_mm2 = 0.0;
    int weight = 0;
    double score = 0.0;  // 0 for sub-minimum-area deposits
};

struct PhantomTruth {
    std::vector<PlantedLesion> lesions;
    double analytic_score = 0.0;
    CacCategory category = CacCategory::VeryLow;
    bool has_distractors = false;
    std::size_t distractor_pixels = 0;
};

struct Phantom {
    StudyVolume volume;
    PhantomTruth truth;
};

Phantom generate_phantom(const PhantomSpec& spec);

struct DatasetGenConfig {
    std::size_t n_patients = 60;
    double category_mix[6] = {1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
    std::uint64_t seed = 0;
    bool include_bone_distractors = false;
    std::size_t slices_override = 0;  // 0: per-study sample from [56, 96]
    double noise_std_hu = 15.0;
};

// Writes one directory per study (manifest.json, volume.raw, truth.json)
// plus labels.json {study_id: {score, category}}. Category counts follow
// largest-remainder apportionment of the mix. Returns per-category counts.
std::vector<std::size_t> generate_dataset(const DatasetGenConfig& cfg, const std::filesystem::path& out_dir);

json truth_to_json(const PhantomTruth& truth);

}  // namespace cacnet
