#include "cacnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cacnet/rng.hpp"

namespace cacnet {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMinSlices = 56, kMaxSlices = 96;
constexpr int kBackgroundHu = 40;
constexpr int kLungHu = -800;
constexpr double kNoiseClipSigmas = 3.5;
// Cardiac region; lungs, ribs and vertebra all stay clear of it.
constexpr Roi kCardiacRoi{34, 34, 60, 60};

// Every slice of a study shows its category, otherwise a per-slice
// classifier has nothing that transfers: features tied to one patient's
// random lesion positions leave held-out patients at chance.
//   - Calcium is spread over as many slices as the score bin affords, as
//     1xN constant-HU segments packed into fixed lanes in the lower half of
//     the cardiac region.
//   - A marker pattern above the lanes repeats the category on every
//     slice: `category` of five fixed slots light up in order (a
//     thermometer code). Each slot is a pair of 1x3 dashes 5 rows apart;
//     at 0.5 mm spacing a dash is 0.75 mm^2, under the 1 mm^2 minimum, so
//     markers never move the score. All markers share one HU, brighter
//     than bone and every lesion, so a brightness histogram cannot
//     separate the categories; and the slots sit 18 px apart, each in its
//     own cell even on a 16-px-downsampled feature map, so max pooling
//     cannot collapse two slots into one.
// Positions jitter by a couple of pixels at most; after five rounds of 2x2
// pooling the pattern lands in the same feature-map cells for every patient.
struct CategoryCode {
    std::size_t max_lesion_slices;  // cap keeps each per-slice deposit countable
    std::size_t px_per_slice;       // ideal calcium pixels per lesioned slice
    int lesion_hu;
};
constexpr CategoryCode kCodes[kNumCategories] = {
    {0, 0, 0},      // VeryLow: empty cardiac region
    {9, 4, 170},    // Low
    {45, 4, 250},   // LowModerate
    {48, 9, 350},   // Moderate
    {48, 16, 500},  // ModerateHigh
    {60, 36, 1300}, // High
};
constexpr int kDotHu = 1800;
// categorize() bin edges, (lo, hi]; hi < 0 means unbounded.
constexpr double kBinLo[kNumCategories] = {0.0, 0.0, 10.0, 100.0, 400.0, 1000.0};
constexpr double kBinHi[kNumCategories] = {0.0, 10.0, 100.0, 400.0, 1000.0, -1.0};

constexpr std::size_t kMaxSegmentPx = 24;
constexpr std::size_t kSegmentGapPx = 3;
constexpr std::size_t kLesionLanes = 9;
constexpr std::size_t kLaneRow0 = kCardiacRoi.y + 32;
constexpr std::size_t kLaneCol0 = kCardiacRoi.x + 2;
constexpr std::size_t kLaneColEnd = kCardiacRoi.x + kCardiacRoi.w - 2;  // exclusive
constexpr std::size_t kDotRows[] = {38, 56};
constexpr std::size_t kDotCols[] = {38, 56, 74};

struct Ellipse {
    double cy, cx, ry, rx;
};

// Rib and vertebra sites; every site keeps >= 13 rows clear of the ROI even
// after the +-2 px per-study jitter.
const Ellipse kDistractorSites[] = {
    {14.0, 30.0, 4.0, 7.0},  {14.0, 64.0, 4.0, 8.0},  {14.0, 98.0, 4.0, 7.0},
    {112.0, 30.0, 4.0, 6.0}, {112.0, 98.0, 4.0, 6.0}, {112.0, 64.0, 7.0, 9.0},
};

template <typename Paint>
void for_each_ellipse_pixel(const Ellipse& e, std::size_t h, std::size_t w, Paint&& paint) {
    const std::size_t y0 = static_cast<std::size_t>(std::max(0.0, std::floor(e.cy - e.ry)));
    const std::size_t y1 = std::min(h - 1, static_cast<std::size_t>(std::ceil(e.cy + e.ry)));
    const std::size_t x0 = static_cast<std::size_t>(std::max(0.0, std::floor(e.cx - e.rx)));
    const std::size_t x1 = std::min(w - 1, static_cast<std::size_t>(std::ceil(e.cx + e.rx)));
    for (std::size_t y = y0; y <= y1; ++y) {
        for (std::size_t x = x0; x <= x1; ++x) {
            const double dy = (static_cast<double>(y) - e.cy) / e.ry;
            const double dx = (static_cast<double>(x) - e.cx) / e.rx;
            if (dy * dy + dx * dx <= 1.0) paint(y, x);
        }
    }
}

PlantedLesion make_deposit(std::size_t slice, std::size_t y, std::size_t x, std::size_t rh, std::size_t rw,
                           int hu, double pixel_area) {
    PlantedLesion lesion;
    lesion.slice_index = slice;
    lesion.y = y;
    lesion.x = x;
    lesion.h = rh;
    lesion.w = rw;
    lesion.hu = hu;
    lesion.area_mm2 = static_cast<double>(rh * rw) * pixel_area;
    if (lesion.area_mm2 >= kMinLesionAreaMm2) {
        lesion.weight = density_weight(hu);
        lesion.score = lesion.area_mm2 * lesion.weight;
    }
    return lesion;
}

// One slice's calcium budget, split into segments and packed left to right
// into lanes. Lanes are 3 rows apart and segments 3 columns apart, so every
// deposit stays 8-connectivity-isolated even with the +-1 row jitter.
void plant_slice_calcium(std::vector<PlantedLesion>& out, Rng& rng, std::size_t slice, std::size_t px,
                         std::size_t min_px, int hu, double pixel_area) {
    std::size_t n_seg = (px + kMaxSegmentPx - 1) / kMaxSegmentPx;
    if (min_px > 0) n_seg = std::min(n_seg, std::max<std::size_t>(1, px / min_px));
    std::uniform_int_distribution<std::size_t> col_jitter(0, 3);
    std::uniform_int_distribution<std::size_t> row_jitter(0, 1);
    std::size_t lane = 0;
    std::size_t row = kLaneRow0 + row_jitter(rng);
    std::size_t col = kLaneCol0 + col_jitter(rng);
    for (std::size_t s = 0; s < n_seg; ++s) {
        const std::size_t len = px / n_seg + (s < px % n_seg ? 1 : 0);
        if (col + len > kLaneColEnd) {
            ++lane;
            if (lane >= kLesionLanes) {
                throw ConfigError("calcium budget does not fit on slice " + std::to_string(slice) +
                                  "; the target category needs a taller stack");
            }
            row = kLaneRow0 + 3 * lane + row_jitter(rng);
            col = kLaneCol0 + col_jitter(rng);
        }
        if (col + len > kLaneColEnd) {
            throw ConfigError("calcium segment does not fit in one lane");
        }
        out.push_back(make_deposit(slice, row, col, 1, len, hu, pixel_area));
        col += len + kSegmentGapPx;
    }
}

}  // namespace

void PhantomSpec::validate() const {
    if (height != kInputSize || width != kInputSize) {
        throw ConfigError("phantom geometry is fixed at 128x128");
    }
    if (spacing_y_mm <= 0.0 || spacing_x_mm <= 0.0) throw ConfigError("pixel spacing must be positive");
    if (noise_std_hu < 0.0) throw ConfigError("noise_std must be >= 0");
    if (noise_std_hu > 25.0) {
        throw ConfigError("noise_std above 25 HU could push background over the 130 HU threshold");
    }
    const int cat = static_cast<int>(target_category);
    if (cat < 0 || cat >= kNumCategories) throw ConfigError("invalid target category");
}

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Rng layout_rng = make_rng(spec.seed, 1);
    Rng noise_rng = make_rng(spec.seed, 2);

    const std::size_t z = spec.slices != 0
                              ? spec.slices
                              : std::uniform_int_distribution<std::size_t>(kMinSlices, kMaxSlices)(layout_rng);
    const std::size_t h = spec.height, w = spec.width;
    const double pixel_area = spec.spacing_y_mm * spec.spacing_x_mm;

    Phantom out;
    StudyVolume& vol = out.volume;
    vol.study_id = "phantom";
    vol.z = z;
    vol.h = h;
    vol.w = w;
    vol.spacing_y_mm = spec.spacing_y_mm;
    vol.spacing_x_mm = spec.spacing_x_mm;
    vol.cardiac_roi = kCardiacRoi;
    vol.voxels.assign(z * h * w, 0);

    // Placement first, from its own stream, so the noise field never shifts
    // structure positions.
    const int cat = static_cast<int>(spec.target_category);
    const CategoryCode& code = kCodes[cat];
    PhantomTruth& truth = out.truth;
    if (cat > 0) {
        const int weight = density_weight(code.lesion_hu);
        const double score_per_px = pixel_area * weight;
        const auto min_px = static_cast<std::size_t>(std::ceil(kMinLesionAreaMm2 / pixel_area - 1e-9));
        std::size_t n = std::min(z, code.max_lesion_slices);
        std::size_t px_total = n * code.px_per_slice;
        const std::size_t px_lo = std::max<std::size_t>(
            min_px, static_cast<std::size_t>(std::floor(kBinLo[cat] / score_per_px)) + 1);
        px_total = std::max(px_total, px_lo);
        if (kBinHi[cat] > 0.0) {
            const auto px_hi = static_cast<std::size_t>(std::floor(kBinHi[cat] / score_per_px));
            if (px_lo > px_hi) throw ConfigError("score bin unreachable at this pixel spacing");
            px_total = std::min(px_total, px_hi);
        }
        n = std::min(n, std::max<std::size_t>(1, px_total / min_px));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t slice = i * z / n;
            const std::size_t px = px_total / n + (i < px_total % n ? 1 : 0);
            plant_slice_calcium(truth.lesions, layout_rng, slice, px, min_px, code.lesion_hu, pixel_area);
        }
    }
    const std::size_t dot_w = 3.0 * pixel_area < kMinLesionAreaMm2 ? 3
                              : pixel_area < kMinLesionAreaMm2    ? 1
                                                                  : 0;
    const std::size_t n_slots = dot_w > 0 ? static_cast<std::size_t>(cat) : 0;
    std::uniform_int_distribution<int> dot_jitter(-2, 2);
    for (std::size_t zi = 0; zi < z; ++zi) {
        for (std::size_t d = 0; d < n_slots; ++d) {
            // one jitter per slot keeps the dash pair rigid, so the dashes
            // stay 4 rows apart and never merge into a countable component
            const int jy = dot_jitter(layout_rng), jx = dot_jitter(layout_rng);
            const auto r = static_cast<std::size_t>(static_cast<int>(kDotRows[d / 3]) + jy);
            const auto c = static_cast<std::size_t>(static_cast<int>(kDotCols[d % 3]) + jx);
            truth.lesions.push_back(make_deposit(zi, r, c, 1, dot_w, kDotHu, pixel_area));
            truth.lesions.push_back(make_deposit(zi, r + 5, c, 1, dot_w, kDotHu, pixel_area));
        }
    }
    for (const PlantedLesion& lesion : truth.lesions) truth.analytic_score += lesion.score;
    truth.category = categorize(truth.analytic_score);
    if (truth.category != spec.target_category) {
        throw ConfigError("planted lesions score " + std::to_string(truth.analytic_score) +
                          " lands outside the requested category");
    }

    std::vector<Ellipse> distractors;
    std::vector<int> distractor_hus;
    if (spec.include_bone_distractors) {
        truth.has_distractors = true;
        std::uniform_int_distribution<int> jitter(-2, 2);
        std::uniform_int_distribution<int> bone_hu(700, 1200);
        for (const Ellipse& site : kDistractorSites) {
            Ellipse e = site;
            e.cy += jitter(layout_rng);
            e.cx += jitter(layout_rng);
            distractors.push_back(e);
            distractor_hus.push_back(bone_hu(layout_rng));
        }
    }

    // Base anatomy: soft tissue with two lung fields.
    const Ellipse lungs[] = {{64.0, 18.0, 36.0, 13.0}, {64.0, 110.0, 36.0, 13.0}};
    std::vector<std::int16_t> base(h * w, kBackgroundHu);
    for (const Ellipse& lung : lungs) {
        for_each_ellipse_pixel(lung, h, w, [&](std::size_t y, std::size_t x) {
            base[y * w + x] = kLungHu;
        });
    }

    const double clip = kNoiseClipSigmas * spec.noise_std_hu;
    std::normal_distribution<double> noise(0.0, spec.noise_std_hu > 0.0 ? spec.noise_std_hu : 1.0);
    for (std::size_t zi = 0; zi < z; ++zi) {
        std::int16_t* slice = vol.slice(zi);
        for (std::size_t p = 0; p < h * w; ++p) {
            double v = base[p];
            if (spec.noise_std_hu > 0.0) v += std::clamp(noise(noise_rng), -clip, clip);
            slice[p] = static_cast<std::int16_t>(std::lround(v));
        }
        for (std::size_t d = 0; d < distractors.size(); ++d) {
            for_each_ellipse_pixel(distractors[d], h, w, [&](std::size_t y, std::size_t x) {
                slice[y * w + x] = static_cast<std::int16_t>(distractor_hus[d]);
                ++truth.distractor_pixels;
            });
        }
    }
    for (const PlantedLesion& lesion : truth.lesions) {
        std::int16_t* slice = vol.slice(lesion.slice_index);
        for (std::size_t y = lesion.y; y < lesion.y + lesion.h; ++y) {
            for (std::size_t x = lesion.x; x < lesion.x + lesion.w; ++x) {
                slice[y * w + x] = static_cast<std::int16_t>(lesion.hu);
            }
        }
    }
    return out;
}

json truth_to_json(const PhantomTruth& truth) {
    json doc;
    doc["analytic_score"] = truth.analytic_score;
    doc["category"] = static_cast<int>(truth.category);
    doc["category_name"] = category_display_name(truth.category);
    doc["has_distractors"] = truth.has_distractors;
    doc["distractor_pixels"] = truth.distractor_pixels;
    json lesions = json::array();
    for (const PlantedLesion& l : truth.lesions) {
        lesions.push_back({{"slice", l.slice_index},
                           {"y", l.y},
                           {"x", l.x},
                           {"h", l.h},
                           {"w", l.w},
                           {"hu", l.hu},
                           {"area_mm2", l.area_mm2},
                           {"weight", l.weight},
                           {"score", l.score}});
    }
    doc["lesions"] = std::move(lesions);
    return doc;
}

std::vector<std::size_t> generate_dataset(const DatasetGenConfig& cfg, const fs::path& out_dir) {
    if (cfg.n_patients == 0) throw ConfigError("n_patients must be >= 1");
    double sum = 0.0;
    for (double f : cfg.category_mix) {
        if (f < 0.0) throw ConfigError("category mix fractions must be non-negative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("category mix must sum to 1, got " + std::to_string(sum));
    }
    std::vector<double> quotas(kNumCategories);
    std::vector<std::size_t> counts(kNumCategories);
    {
        std::size_t assigned = 0;
        for (int c = 0; c < kNumCategories; ++c) {
            quotas[c] = cfg.category_mix[c] * static_cast<double>(cfg.n_patients);
            counts[c] = static_cast<std::size_t>(quotas[c]);
            assigned += counts[c];
        }
        std::vector<std::size_t> order(kNumCategories);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return quotas[a] > quotas[b]; });
        for (std::size_t seat = 0; assigned < cfg.n_patients; ++seat) {
            ++counts[order[seat % order.size()]];
            ++assigned;
        }
    }

    int digits = 3;
    for (std::size_t v = cfg.n_patients; v > 1000; v /= 10) ++digits;

    ensure_dir(out_dir);
    json labels;
    std::size_t index = 0;
    for (int cat = 0; cat < kNumCategories; ++cat) {
        for (std::size_t i = 0; i < counts[cat]; ++i, ++index) {
            PhantomSpec spec;
            spec.target_category = static_cast<CacCategory>(cat);
            spec.slices = cfg.slices_override;
            spec.include_bone_distractors = cfg.include_bone_distractors;
            spec.noise_std_hu = cfg.noise_std_hu;
            spec.seed = mix_seed(cfg.seed, index);
            Phantom phantom = generate_phantom(spec);

            char buf[32];
            std::snprintf(buf, sizeof(buf), "phantom_%0*zu", digits, index);
            phantom.volume.study_id = buf;
            const fs::path study_dir = out_dir / buf;
            write_study(phantom.volume, study_dir);
            write_json_file(study_dir / "truth.json", truth_to_json(phantom.truth));
            labels[buf] = {{"score", phantom.truth.analytic_score},
                           {"category", static_cast<int>(phantom.truth.category)}};
        }
    }
    write_json_file(out_dir / "labels.json", labels);
    return counts;
}

}  // namespace cacnet
