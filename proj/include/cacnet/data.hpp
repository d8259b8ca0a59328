#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cacnet/agatston.hpp"
#include "cacnet/fsio.hpp"
#include "cacnet/tensor.hpp"
#include "cacnet/volume.hpp"

// Ingestion and dataset plumbing: raw int16 volumes described by JSON
// manifests, HU normalization to [0,1] model inputs, patient-level labels
// copied to every slice, and seeded splits/folds/batches.

namespace cacnet {

inline constexpr std::size_t kInputSize = 128;
inline constexpr int kHuWindowLo = -1000;
inline constexpr int kHuWindowHi = 2000;

struct LabeledSlice {
    TensorF image{{1}};  // [1 x 128 x 128], values in [0,1]
    int label = 0;
    std::string patient_id;
};

struct SplitManifest {
    std::uint64_t seed = 0;
    double fractions[3] = {0.49, 0.21, 0.30};
    std::vector<std::string> train, val, test;
};

struct FoldManifest {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::vector<std::vector<std::string>> folds;
};

// Study directory layout: <dir>/manifest.json + the raw voxel file it names.
// Raw file: little-endian signed 16-bit HU in (z,y,x) order; hu_offset (if
// present) is added to every stored value on load.
StudyVolume load_study(const std::filesystem::path& manifest_path);
void write_study(const StudyVolume& vol, const std::filesystem::path& dir);

// Clip HU to the window, map affinely onto [0,1], then bilinearly resample
// each slice to 128x128 when the stored grid differs.
std::vector<TensorF> normalize_hu(const StudyVolume& vol);

double normalize_hu_value(double hu);

std::vector<LabeledSlice> label_study(const StudyVolume& vol, double agatston_total);

SplitManifest split_patients(const std::vector<std::string>& patient_ids, const double (&fractions)[3],
                             std::uint64_t seed);
FoldManifest kfold_patients(const std::vector<std::string>& patient_ids, std::size_t k, std::uint64_t seed);

// Throws LeakageError if any patient id appears in more than one part.
void check_split_exclusive(const SplitManifest& split);
void check_folds_exclusive(const FoldManifest& folds);

json split_to_json(const SplitManifest& split);
SplitManifest split_from_json(const json& doc);
json folds_to_json(const FoldManifest& folds);
FoldManifest folds_from_json(const json& doc);

// Per-epoch batch order: indices 0..n-1 shuffled with seed XOR epoch, then
// chunked; the final short batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch);

// A dataset directory holds one subdirectory per study plus labels.json
// mapping study_id -> {score, category}.
struct DatasetEntry {
    StudyVolume volume;
    double score = 0.0;
    CacCategory category = CacCategory::VeryLow;
};

struct Dataset {
    std::vector<DatasetEntry> studies;

    const DatasetEntry* find(const std::string& study_id) const;
    std::vector<std::string> study_ids() const;
};

Dataset load_dataset(const std::filesystem::path& dir);

// Normalized labeled slices for the named patients, in the given id order.
// Studies are normalized in parallel; slice order within the result is
// (patient order, slice index).
std::vector<LabeledSlice> make_labeled_slices(const Dataset& ds, const std::vector<std::string>& ids);

}  // namespace cacnet
