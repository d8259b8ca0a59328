#include "cacnet/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "cacnet/rng.hpp"

static_assert(std::endian::native == std::endian::little, "raw volume I/O assumes a little-endian host");

namespace cacnet {

namespace fs = std::filesystem;

namespace {

const json& require_field(const json& doc, const char* key, const fs::path& path) {
    auto it = doc.find(key);
    if (it == doc.end()) throw ManifestError("manifest " + path.string() + " missing field '" + key + "'");
    return *it;
}

fs::path resolve_manifest_path(const fs::path& p) {
    if (fs::is_directory(p)) return p / "manifest.json";
    return p;
}

}  // namespace

StudyVolume load_study(const fs::path& manifest_path) {
    const fs::path mpath = resolve_manifest_path(manifest_path);
    const json doc = read_json_file(mpath);
    StudyVolume vol;
    try {
        vol.study_id = require_field(doc, "study_id", mpath).get<std::string>();
        vol.z = require_field(doc, "z", mpath).get<std::size_t>();
        vol.h = require_field(doc, "h", mpath).get<std::size_t>();
        vol.w = require_field(doc, "w", mpath).get<std::size_t>();
        const auto& spacing = require_field(doc, "pixel_spacing_mm", mpath);
        if (!spacing.is_array() || spacing.size() != 2) {
            throw ManifestError("manifest " + mpath.string() + ": pixel_spacing_mm must be [py, px]");
        }
        vol.spacing_y_mm = spacing[0].get<double>();
        vol.spacing_x_mm = spacing[1].get<double>();
        vol.slice_thickness_mm = require_field(doc, "slice_thickness_mm", mpath).get<double>();
        if (doc.contains("cardiac_roi")) {
            const auto& r = doc["cardiac_roi"];
            vol.cardiac_roi = Roi{r.at("y").get<std::size_t>(), r.at("x").get<std::size_t>(),
                                  r.at("h").get<std::size_t>(), r.at("w").get<std::size_t>()};
        }
    } catch (const json::exception& e) {
        throw ManifestError("manifest " + mpath.string() + ": " + e.what());
    }
    const std::string raw_name = require_field(doc, "raw_file", mpath).get<std::string>();
    const int hu_offset = doc.value("hu_offset", 0);

    const fs::path raw_path = mpath.parent_path() / raw_name;
    const std::string bytes = read_file_bytes(raw_path);
    const std::size_t expected = vol.z * vol.h * vol.w * 2;
    if (bytes.size() != expected) {
        throw CorruptVolumeError("volume " + raw_path.string() + ": expected " + std::to_string(expected) +
                                 " bytes, got " + std::to_string(bytes.size()));
    }
    vol.voxels.resize(vol.z * vol.h * vol.w);
    std::memcpy(vol.voxels.data(), bytes.data(), bytes.size());
    if (hu_offset != 0) {
        for (auto& v : vol.voxels) {
            const int shifted = static_cast<int>(v) + hu_offset;
            v = static_cast<std::int16_t>(std::clamp(shifted, -32768, 32767));
        }
    }
    vol.validate();
    return vol;
}

void write_study(const StudyVolume& vol, const fs::path& dir) {
    vol.validate();
    ensure_dir(dir);
    json doc;
    doc["study_id"] = vol.study_id;
    doc["z"] = vol.z;
    doc["h"] = vol.h;
    doc["w"] = vol.w;
    doc["pixel_spacing_mm"] = {vol.spacing_y_mm, vol.spacing_x_mm};
    doc["slice_thickness_mm"] = vol.slice_thickness_mm;
    doc["raw_file"] = "volume.raw";
    doc["hu_offset"] = 0;
    if (!vol.cardiac_roi.whole_slice()) {
        doc["cardiac_roi"] = {{"y", vol.cardiac_roi.y}, {"x", vol.cardiac_roi.x}, {"h", vol.cardiac_roi.h},
                              {"w", vol.cardiac_roi.w}};
    }
    std::string bytes(vol.voxels.size() * 2, '\0');
    std::memcpy(bytes.data(), vol.voxels.data(), bytes.size());
    atomic_write_file(dir / "volume.raw", bytes);
    write_json_file(dir / "manifest.json", doc);
}

double normalize_hu_value(double hu) {
    const double clipped = std::clamp(hu, static_cast<double>(kHuWindowLo), static_cast<double>(kHuWindowHi));
    return (clipped - kHuWindowLo) / static_cast<double>(kHuWindowHi - kHuWindowLo);
}

namespace {

TensorF normalize_slice(const std::int16_t* hu, std::size_t h, std::size_t w) {
    TensorF out({1, kInputSize, kInputSize});
    if (h == kInputSize && w == kInputSize) {
        for (std::size_t i = 0; i < kInputSize * kInputSize; ++i) {
            out[i] = static_cast<float>(normalize_hu_value(hu[i]));
        }
        return out;
    }
    // Bilinear resample with half-pixel-centre alignment, sampling the
    // already-normalized field.
    const double sy = static_cast<double>(h) / kInputSize;
    const double sx = static_cast<double>(w) / kInputSize;
    for (std::size_t oy = 0; oy < kInputSize; ++oy) {
        const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t ox = 0; ox < kInputSize; ++ox) {
            const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double v00 = normalize_hu_value(hu[y0 * w + x0]);
            const double v01 = normalize_hu_value(hu[y0 * w + x1]);
            const double v10 = normalize_hu_value(hu[y1 * w + x0]);
            const double v11 = normalize_hu_value(hu[y1 * w + x1]);
            const double top = v00 + (v01 - v00) * wx;
            const double bot = v10 + (v11 - v10) * wx;
            out[oy * kInputSize + ox] = static_cast<float>(top + (bot - top) * wy);
        }
    }
    return out;
}

}  // namespace

std::vector<TensorF> normalize_hu(const StudyVolume& vol) {
    vol.validate();
    std::vector<TensorF> slices(vol.z, TensorF({1}));
#pragma omp parallel for schedule(static) if (vol.z > 1)
    for (std::size_t zi = 0; zi < vol.z; ++zi) {
        slices[zi] = normalize_slice(vol.slice(zi), vol.h, vol.w);
    }
    return slices;
}

std::vector<LabeledSlice> label_study(const StudyVolume& vol, double agatston_total) {
    if (!(agatston_total >= 0.0)) {
        throw DataError("study " + vol.study_id + ": negative Agatston score " + std::to_string(agatston_total));
    }
    const int label = static_cast<int>(categorize(agatston_total));
    std::vector<TensorF> imgs = normalize_hu(vol);
    std::vector<LabeledSlice> out;
    out.reserve(imgs.size());
    for (auto& img : imgs) out.push_back(LabeledSlice{std::move(img), label, vol.study_id});
    return out;
}

namespace {

// Floor every quota, then hand the leftover seats to the largest quotas
// (ties to the earlier part). For the canonical 68-patient split this
// yields 34/14/20.
std::vector<std::size_t> apportion(const std::vector<double>& quotas, std::size_t total) {
    std::vector<std::size_t> counts(quotas.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < quotas.size(); ++i) {
        counts[i] = static_cast<std::size_t>(quotas[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return quotas[a] > quotas[b]; });
    for (std::size_t seat = 0; assigned < total; ++seat) {
        ++counts[order[seat % order.size()]];
        ++assigned;
    }
    return counts;
}

}  // namespace

SplitManifest split_patients(const std::vector<std::string>& patient_ids, const double (&fractions)[3],
                             std::uint64_t seed) {
    if (patient_ids.size() < 3) {
        throw ConfigError("need at least 3 patients to split, got " + std::to_string(patient_ids.size()));
    }
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("split fractions must be non-negative");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1, got " + std::to_string(sum));
    }
    std::vector<std::string> ids = patient_ids;
    Rng rng = make_rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n = ids.size();
    std::vector<double> quotas = {fractions[0] * n, fractions[1] * n, fractions[2] * n};
    const std::vector<std::size_t> counts = apportion(quotas, n);
    SplitManifest split;
    split.seed = seed;
    for (int i = 0; i < 3; ++i) split.fractions[i] = fractions[i];
    auto it = ids.begin();
    split.train.assign(it, it + static_cast<std::ptrdiff_t>(counts[0]));
    it += static_cast<std::ptrdiff_t>(counts[0]);
    split.val.assign(it, it + static_cast<std::ptrdiff_t>(counts[1]));
    it += static_cast<std::ptrdiff_t>(counts[1]);
    split.test.assign(it, ids.end());
    return split;
}

FoldManifest kfold_patients(const std::vector<std::string>& patient_ids, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw ConfigError("fold count must be >= 1");
    if (k > patient_ids.size()) {
        throw ConfigError("fold count " + std::to_string(k) + " exceeds patient count " +
                          std::to_string(patient_ids.size()));
    }
    std::vector<std::string> ids = patient_ids;
    Rng rng = make_rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    FoldManifest out;
    out.seed = seed;
    out.k = k;
    out.folds.resize(k);
    for (std::size_t i = 0; i < ids.size(); ++i) out.folds[i % k].push_back(std::move(ids[i]));
    return out;
}

namespace {

void check_disjoint(const std::vector<const std::vector<std::string>*>& parts, const char* what) {
    std::set<std::string> seen;
    for (const auto* part : parts) {
        for (const auto& id : *part) {
            if (!seen.insert(id).second) {
                throw LeakageError(std::string("patient '") + id + "' appears in more than one " + what);
            }
        }
    }
}

}  // namespace

void check_split_exclusive(const SplitManifest& split) {
    check_disjoint({&split.train, &split.val, &split.test}, "split partition");
}

void check_folds_exclusive(const FoldManifest& folds) {
    std::vector<const std::vector<std::string>*> parts;
    for (const auto& f : folds.folds) parts.push_back(&f);
    check_disjoint(parts, "fold");
}

json split_to_json(const SplitManifest& split) {
    json doc;
    doc["seed"] = split.seed;
    doc["fractions"] = {split.fractions[0], split.fractions[1], split.fractions[2]};
    doc["train"] = split.train;
    doc["val"] = split.val;
    doc["test"] = split.test;
    return doc;
}

SplitManifest split_from_json(const json& doc) {
    SplitManifest split;
    try {
        split.seed = doc.at("seed").get<std::uint64_t>();
        const auto& fr = doc.at("fractions");
        for (int i = 0; i < 3; ++i) split.fractions[i] = fr.at(i).get<double>();
        split.train = doc.at("train").get<std::vector<std::string>>();
        split.val = doc.at("val").get<std::vector<std::string>>();
        split.test = doc.at("test").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ManifestError(std::string("invalid split manifest: ") + e.what());
    }
    return split;
}

json folds_to_json(const FoldManifest& folds) {
    json doc;
    doc["seed"] = folds.seed;
    doc["k"] = folds.k;
    doc["folds"] = folds.folds;
    return doc;
}

FoldManifest folds_from_json(const json& doc) {
    FoldManifest folds;
    try {
        folds.seed = doc.at("seed").get<std::uint64_t>();
        folds.k = doc.at("k").get<std::size_t>();
        folds.folds = doc.at("folds").get<std::vector<std::vector<std::string>>>();
    } catch (const json::exception& e) {
        throw ManifestError(std::string("invalid fold manifest: ") + e.what());
    }
    return folds;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch) {
    if (n == 0) throw DataError("no examples to batch");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(seed ^ epoch);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, n);
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                             idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

const DatasetEntry* Dataset::find(const std::string& study_id) const {
    for (const auto& e : studies) {
        if (e.volume.study_id == study_id) return &e;
    }
    return nullptr;
}

std::vector<std::string> Dataset::study_ids() const {
    std::vector<std::string> ids;
    ids.reserve(studies.size());
    for (const auto& e : studies) ids.push_back(e.volume.study_id);
    return ids;
}

Dataset load_dataset(const fs::path& dir) {
    const fs::path labels_path = dir / "labels.json";
    const json labels = read_json_file(labels_path);
    if (!labels.is_object()) throw ManifestError(labels_path.string() + " must be a JSON object keyed by study id");
    Dataset ds;
    for (const auto& [id, entry] : labels.items()) {
        DatasetEntry e;
        try {
            e.score = entry.at("score").get<double>();
            const int cat = entry.at("category").get<int>();
            if (cat < 0 || cat >= kNumCategories) {
                throw ManifestError(labels_path.string() + ": category " + std::to_string(cat) + " out of range");
            }
            e.category = static_cast<CacCategory>(cat);
        } catch (const json::exception& ex) {
            throw ManifestError(labels_path.string() + ": entry '" + id + "': " + ex.what());
        }
        e.volume = load_study(dir / id / "manifest.json");
        if (e.volume.study_id != id) {
            throw ManifestError("study directory '" + id + "' contains manifest for '" + e.volume.study_id + "'");
        }
        ds.studies.push_back(std::move(e));
    }
    if (ds.studies.empty()) throw DataError("dataset at " + dir.string() + " contains no studies");
    return ds;
}

std::vector<LabeledSlice> make_labeled_slices(const Dataset& ds, const std::vector<std::string>& ids) {
    std::vector<std::vector<LabeledSlice>> per_study(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const DatasetEntry* e = ds.find(ids[i]);
        if (!e) throw DataError("study id '" + ids[i] + "' not present in dataset");
        per_study[i] = label_study(e->volume, e->score);
    }
    std::vector<LabeledSlice> out;
    for (auto& group : per_study) {
        for (auto& s : group) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace cacnet
