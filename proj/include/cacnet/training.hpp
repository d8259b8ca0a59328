#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cacnet/data.hpp"
#include "cacnet/metrics.hpp"
#include "cacnet/model.hpp"

// Training recipe: class-weighted cross-entropy on softmax outputs, Adam
// with bias correction, halve-on-plateau learning-rate schedule, epoch loop
// with per-epoch seeded shuffling, and grouped cross-validation.

namespace cacnet {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t epochs = 15;
    std::size_t batch_size = 32;
    double lr_factor = 0.5;
    std::size_t lr_patience = 2;
    double lr_min = 1e-6;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        if (lr_min > learning_rate) throw ConfigError("lr_min must not exceed learning_rate");
        if (lr_factor <= 0.0 || lr_factor >= 1.0) throw ConfigError("lr_factor must be in (0,1)");
        if (lr_patience < 1) throw ConfigError("lr_patience must be >= 1");
    }
};

json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& doc);

// w_c = N / (K_present * n_c); classes with zero count get weight 0 and are
// reported in zero_classes. Throws DataError when every count is zero.
std::vector<double> compute_class_weights(const std::vector<std::uint64_t>& counts,
                                          std::vector<std::size_t>* zero_classes = nullptr);

// loss = -w_label * log(max(p_label, 1e-12)); clamp events increment the
// counter when provided.
template <typename T>
T weighted_ce_loss(const Tensor<T>& probs, int label, const std::vector<double>& weights,
                   std::uint64_t* clamp_counter = nullptr) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                        " classes");
    }
    T p = probs[static_cast<std::size_t>(label)];
    constexpr T clamp = static_cast<T>(1e-12);
    if (p < clamp) {
        p = clamp;
        if (clamp_counter) ++*clamp_counter;
    }
    return static_cast<T>(-weights[static_cast<std::size_t>(label)] * std::log(static_cast<double>(p)));
}

// dL/dlogits for one batch item under batch-mean reduction:
// w_label * (p - onehot(label)) / batch_size.
template <typename T>
Tensor<T> fused_ce_dlogits(const Tensor<T>& probs, int label, const std::vector<double>& weights,
                           std::size_t batch_size) {
    Tensor<T> d(probs.shape());
    const T scale = static_cast<T>(weights[static_cast<std::size_t>(label)] / static_cast<double>(batch_size));
    for (std::size_t i = 0; i < probs.size(); ++i) d[i] = scale * probs[i];
    d[static_cast<std::size_t>(label)] -= scale;
    return d;
}

// Standard Adam with bias correction over the model's parameter groups.
// Moments are owned here and indexed in param-group order.
class Adam {
public:
    Adam(std::vector<ParamGroup<float>> groups, double beta1, double beta2, double eps);

    // Applies one update from the currently accumulated gradients.
    // lr == 0 leaves parameters untouched (still advances the step counter).
    // Any non-finite gradient aborts with NumericError before any slot is
    // modified.
    void step(double lr);

    std::uint64_t steps() const { return t_; }

private:
    struct Slot {
        ParamGroup<float> group;
        std::vector<float> m, v;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
};

// Halve after `patience` consecutive non-improving epochs (improvement =
// val loss dropping below best by more than 1e-8), floored at min_lr; the
// counter resets after each halving.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, double factor, std::size_t patience, double min_lr)
        : lr_(initial_lr), factor_(factor), min_lr_(min_lr), patience_(patience) {}

    double update(double val_loss) {
        if (val_loss < best_ - kImprovementEps) {
            best_ = val_loss;
            bad_epochs_ = 0;
        } else if (++bad_epochs_ >= patience_) {
            lr_ = std::max(lr_ * factor_, min_lr_);
            bad_epochs_ = 0;
        }
        return lr_;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }

    static constexpr double kImprovementEps = 1e-8;

private:
    double lr_, factor_, min_lr_;
    std::size_t patience_, bad_epochs_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    std::vector<double> class_weights;
    std::vector<std::size_t> zero_weight_classes;
    std::uint64_t prob_clamp_events = 0;
    double final_lr = 0.0;
};

// One JSON object per epoch: epoch, lr, train_loss, train_acc, val_loss,
// val_acc.
std::string history_to_jsonl(const std::vector<EpochStats>& history);

int argmax_class(const float* probs, std::size_t k);

// Trains in place. Class weights come from the training set's slice counts.
// Throws LeakageError if train and val share a patient, DataError if either
// set is empty. on_epoch, when set, is called after each epoch completes.
TrainResult train(ModelF& model, const std::vector<LabeledSlice>& train_set, const std::vector<LabeledSlice>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {});

struct SlicePrediction {
    std::string patient_id;
    int truth = 0;
    int pred = 0;
    std::vector<float> probs;
};

std::vector<SlicePrediction> predict_slices(ModelF& model, const std::vector<LabeledSlice>& slices);
EvaluationReport evaluate_slices(ModelF& model, const std::vector<LabeledSlice>& slices);

struct CvFoldResult {
    std::vector<std::string> held_out_ids;
    TrainResult training;
    EvaluationReport report;
};

struct CvResult {
    FoldManifest folds;
    std::vector<CvFoldResult> fold_results;
    EvaluationReport pooled;
};

// Grouped k-fold: train on k-1 folds (with an internal ~30% patient-level
// validation carve for the scheduler), evaluate on the held-out fold, pool
// the confusion matrices elementwise.
CvResult run_cross_validation(const Dataset& ds, std::size_t k, const TrainConfig& tcfg, const ModelConfig& mcfg);

}  // namespace cacnet
