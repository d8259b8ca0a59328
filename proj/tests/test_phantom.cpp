#include "doctest.h"

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "cacnet/agatston.hpp"
#include "cacnet/data.hpp"
#include "cacnet/errors.hpp"
#include "cacnet/phantom.hpp"
#include "cacnet/rng.hpp"

using namespace cacnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("cacnet_phantom_" + std::to_string(make_rng(std::random_device{}())()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

PhantomSpec base_spec(CacCategory cat, std::uint64_t seed, bool distractors = false) {
    PhantomSpec s;
    s.target_category = cat;
    s.slices = 12;
    s.include_bone_distractors = distractors;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("same seed reproduces the phantom byte for byte") {
    const Phantom a = generate_phantom(base_spec(CacCategory::Moderate, 99, true));
    const Phantom b = generate_phantom(base_spec(CacCategory::Moderate, 99, true));
    CHECK(a.volume.voxels == b.volume.voxels);
    CHECK(a.truth.analytic_score == b.truth.analytic_score);
    CHECK(a.truth.lesions.size() == b.truth.lesions.size());

    const Phantom c = generate_phantom(base_spec(CacCategory::Moderate, 100, true));
    CHECK(a.volume.voxels != c.volume.voxels);
}

TEST_CASE("very-low phantoms score exactly zero inside the ROI") {
    for (std::uint64_t seed : {1ULL, 17ULL, 3000ULL}) {
        const Phantom p = generate_phantom(base_spec(CacCategory::VeryLow, seed));
        const auto roi_score = agatston_study_score(p.volume, p.volume.cardiac_roi);
        CHECK(roi_score.total == 0.0);
        CHECK(p.truth.analytic_score == 0.0);
        CHECK(p.truth.category == CacCategory::VeryLow);
        // No distractors requested: the whole slice is clean too.
        CHECK(agatston_study_score(p.volume).total == 0.0);
    }
}

TEST_CASE("scorer closure: ROI score equals the planted analytic score for every category") {
    for (int cat = 0; cat < kNumCategories; ++cat) {
        for (std::uint64_t seed : {5ULL, 41ULL}) {
            const Phantom p = generate_phantom(base_spec(static_cast<CacCategory>(cat), seed));
            const double scored = agatston_study_score(p.volume, p.volume.cardiac_roi).total;
            CHECK(scored == p.truth.analytic_score);
            CHECK(categorize(scored) == static_cast<CacCategory>(cat));
            CHECK(p.truth.category == static_cast<CacCategory>(cat));
        }
    }
}

TEST_CASE("high-category phantoms land above 1000") {
    const Phantom p = generate_phantom(base_spec(CacCategory::High, 2));
    CHECK(agatston_study_score(p.volume, p.volume.cardiac_roi).total > 1000.0);
}

TEST_CASE("planted lesion bookkeeping is self-consistent") {
    const Phantom p = generate_phantom(base_spec(CacCategory::ModerateHigh, 8));
    double sum = 0.0;
    for (const auto& l : p.truth.lesions) {
        if (l.score > 0.0) {
            CHECK(l.score == l.area_mm2 * l.weight);
            CHECK(l.area_mm2 >= kMinLesionAreaMm2);
            CHECK(l.weight == density_weight(l.hu));
        } else {
            CHECK(l.area_mm2 < kMinLesionAreaMm2);
        }
        CHECK(l.slice_index < p.volume.z);
        sum += l.score;
    }
    CHECK(sum == p.truth.analytic_score);
}

TEST_CASE("distractors only ever add score outside the ROI") {
    for (int cat = 0; cat < kNumCategories; ++cat) {
        const Phantom p = generate_phantom(base_spec(static_cast<CacCategory>(cat), 13, true));
        REQUIRE(p.truth.has_distractors);
        const double roi = agatston_study_score(p.volume, p.volume.cardiac_roi).total;
        const double whole = agatston_study_score(p.volume).total;
        CHECK(roi == p.truth.analytic_score);
        CHECK(whole >= roi);
        if (p.truth.distractor_pixels > 0) CHECK(whole > roi);
    }
}

TEST_CASE("distractor-free phantoms report zero distractor pixels") {
    const Phantom p = generate_phantom(base_spec(CacCategory::Low, 4, false));
    CHECK_FALSE(p.truth.has_distractors);
    CHECK(p.truth.distractor_pixels == 0);
}

TEST_CASE("phantom geometry follows the spec fields") {
    PhantomSpec s = base_spec(CacCategory::Low, 6);
    s.slices = 9;
    const Phantom p = generate_phantom(s);
    CHECK(p.volume.z == 9);
    CHECK(p.volume.h == kInputSize);
    CHECK(p.volume.w == kInputSize);
    CHECK(p.volume.spacing_y_mm == 0.5);
    CHECK(p.volume.spacing_x_mm == 0.5);
    CHECK_FALSE(p.volume.cardiac_roi.whole_slice());

    // slices == 0 samples the clinical-ish range.
    PhantomSpec auto_slices = base_spec(CacCategory::Low, 6);
    auto_slices.slices = 0;
    const Phantom q = generate_phantom(auto_slices);
    CHECK(q.volume.z >= 56);
    CHECK(q.volume.z <= 96);
}

TEST_CASE("phantom spec validation") {
    PhantomSpec s = base_spec(CacCategory::Low, 1);
    s.spacing_y_mm = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = base_spec(CacCategory::Low, 1);
    s.noise_std_hu = -1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = base_spec(CacCategory::Low, 1);
    s.noise_std_hu = 26.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = base_spec(CacCategory::Low, 1);
    s.height = 16;  // too small for the layout
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_NOTHROW(base_spec(CacCategory::Low, 1).validate());
}

TEST_CASE("generated dataset apportions categories and writes exact labels") {
    TempDir tmp;
    DatasetGenConfig cfg;
    cfg.n_patients = 12;
    cfg.seed = 7;
    cfg.slices_override = 6;
    const auto counts = generate_dataset(cfg, tmp.path);
    REQUIRE(counts.size() == 6);
    for (std::size_t c : counts) CHECK(c == 2);

    const Dataset ds = load_dataset(tmp.path);
    REQUIRE(ds.studies.size() == 12);
    std::set<int> seen;
    for (const auto& e : ds.studies) {
        const double roi_score = agatston_study_score(e.volume, e.volume.cardiac_roi).total;
        CHECK(roi_score == e.score);
        CHECK(categorize(e.score) == e.category);
        CHECK(e.volume.z == 6);
        seen.insert(static_cast<int>(e.category));
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("dataset generation is deterministic and mix-sensitive") {
    TempDir a, b, c;
    DatasetGenConfig cfg;
    cfg.n_patients = 6;
    cfg.seed = 21;
    cfg.slices_override = 4;
    generate_dataset(cfg, a.path);
    generate_dataset(cfg, b.path);
    const Dataset da = load_dataset(a.path);
    const Dataset db = load_dataset(b.path);
    REQUIRE(da.studies.size() == db.studies.size());
    for (std::size_t i = 0; i < da.studies.size(); ++i) {
        CHECK(da.studies[i].volume.study_id == db.studies[i].volume.study_id);
        CHECK(da.studies[i].volume.voxels == db.studies[i].volume.voxels);
        CHECK(da.studies[i].score == db.studies[i].score);
    }

    DatasetGenConfig skew = cfg;
    double mix[6] = {0.0, 0.0, 0.5, 0.5, 0.0, 0.0};
    for (int i = 0; i < 6; ++i) skew.category_mix[i] = mix[i];
    const auto counts = generate_dataset(skew, c.path);
    CHECK(counts == std::vector<std::size_t>{0, 0, 3, 3, 0, 0});
}

TEST_CASE("truth JSON captures score, category, and lesions") {
    const Phantom p = generate_phantom(base_spec(CacCategory::Moderate, 31, true));
    const json doc = truth_to_json(p.truth);
    CHECK(doc.at("analytic_score").get<double>() == p.truth.analytic_score);
    CHECK(doc.at("category").get<int>() == static_cast<int>(p.truth.category));
    CHECK(doc.at("has_distractors").get<bool>());
    CHECK(doc.at("lesions").size() == p.truth.lesions.size());
}
