#include "cacnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cacnet/rng.hpp"

namespace cacnet {

json train_config_to_json(const TrainConfig& cfg) {
    json doc;
    doc["learning_rate"] = cfg.learning_rate;
    doc["epochs"] = cfg.epochs;
    doc["batch_size"] = cfg.batch_size;
    doc["lr_factor"] = cfg.lr_factor;
    doc["lr_patience"] = cfg.lr_patience;
    doc["lr_min"] = cfg.lr_min;
    doc["seed"] = cfg.seed;
    doc["adam_beta1"] = cfg.adam_beta1;
    doc["adam_beta2"] = cfg.adam_beta2;
    doc["adam_eps"] = cfg.adam_eps;
    return doc;
}

TrainConfig train_config_from_json(const json& doc) {
    TrainConfig cfg;
    try {
        cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
        cfg.epochs = doc.value("epochs", cfg.epochs);
        cfg.batch_size = doc.value("batch_size", cfg.batch_size);
        cfg.lr_factor = doc.value("lr_factor", cfg.lr_factor);
        cfg.lr_patience = doc.value("lr_patience", cfg.lr_patience);
        cfg.lr_min = doc.value("lr_min", cfg.lr_min);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.adam_beta1 = doc.value("adam_beta1", cfg.adam_beta1);
        cfg.adam_beta2 = doc.value("adam_beta2", cfg.adam_beta2);
        cfg.adam_eps = doc.value("adam_eps", cfg.adam_eps);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid train config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::vector<double> compute_class_weights(const std::vector<std::uint64_t>& counts,
                                          std::vector<std::size_t>* zero_classes) {
    std::uint64_t n = 0;
    std::size_t present = 0;
    for (auto c : counts) {
        n += c;
        if (c > 0) ++present;
    }
    if (n == 0) throw DataError("cannot compute class weights: all class counts are zero");
    std::vector<double> weights(counts.size(), 0.0);
    if (zero_classes) zero_classes->clear();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            if (zero_classes) zero_classes->push_back(c);
            continue;
        }
        weights[c] = static_cast<double>(n) / (static_cast<double>(present) * static_cast<double>(counts[c]));
    }
    return weights;
}

Adam::Adam(std::vector<ParamGroup<float>> groups, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& g : groups) {
        Slot slot;
        slot.group = g;
        slot.m.assign(g.value->size(), 0.0f);
        slot.v.assign(g.value->size(), 0.0f);
        slots_.push_back(std::move(slot));
    }
}

void Adam::step(double lr) {
    for (const Slot& slot : slots_) {
        const float* g = slot.group.grad->data();
        for (std::size_t i = 0; i < slot.group.grad->size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("non-finite gradient in " + slot.group.name + " at flat index " +
                                   std::to_string(i));
            }
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float lr_hat = static_cast<float>(lr / bc1);
    const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(eps_);
    for (Slot& slot : slots_) {
        float* p = slot.group.value->data();
        const float* g = slot.group.grad->data();
        float* m = slot.m.data();
        float* v = slot.v.data();
        const std::size_t n = slot.group.value->size();
#pragma omp parallel for schedule(static) if (n > (std::size_t{1} << 15))
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            p[i] -= lr_hat * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

std::string history_to_jsonl(const std::vector<EpochStats>& history) {
    std::string out;
    for (const EpochStats& e : history) {
        json row;
        row["epoch"] = e.epoch;
        row["lr"] = e.lr;
        row["train_loss"] = e.train_loss;
        row["train_acc"] = e.train_acc;
        row["val_loss"] = e.val_loss;
        row["val_acc"] = e.val_acc;
        out += row.dump();
        out += '\n';
    }
    return out;
}

int argmax_class(const float* probs, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<int>(best);
}

namespace {

void check_patient_disjoint(const std::vector<LabeledSlice>& a, const std::vector<LabeledSlice>& b,
                            const char* a_name, const char* b_name) {
    std::set<std::string> ids;
    for (const auto& s : a) ids.insert(s.patient_id);
    for (const auto& s : b) {
        if (ids.count(s.patient_id)) {
            throw LeakageError("patient '" + s.patient_id + "' appears in both " + a_name + " and " + b_name);
        }
    }
}

struct EvalPassResult {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

EvalPassResult eval_pass(ModelF& model, const std::vector<LabeledSlice>& slices, const std::vector<double>& weights,
                         std::uint64_t* clamp_counter, Rng& rng) {
    EvalPassResult out;
    std::size_t correct = 0;
    for (const LabeledSlice& s : slices) {
        const TensorF probs = model.forward(s.image, Mode::Eval, rng);
        out.mean_loss += weighted_ce_loss(probs, s.label, weights, clamp_counter);
        if (argmax_class(probs.data(), probs.size()) == s.label) ++correct;
    }
    out.mean_loss /= static_cast<double>(slices.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(slices.size());
    return out;
}

}  // namespace

TrainResult train(ModelF& model, const std::vector<LabeledSlice>& train_set, const std::vector<LabeledSlice>& val_set,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
    cfg.validate();
    if (train_set.empty() || val_set.empty()) throw DataError("train and validation sets must be non-empty");
    check_patient_disjoint(train_set, val_set, "train", "validation");

    const std::size_t k = model.config().num_classes;
    std::vector<std::uint64_t> counts(k, 0);
    for (const auto& s : train_set) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= k) {
            throw DataError("label " + std::to_string(s.label) + " out of range for " + std::to_string(k) +
                            " classes");
        }
        ++counts[static_cast<std::size_t>(s.label)];
    }
    TrainResult result;
    result.class_weights = compute_class_weights(counts, &result.zero_weight_classes);

    Adam opt(model.param_groups(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    PlateauScheduler sched(cfg.learning_rate, cfg.lr_factor, cfg.lr_patience, cfg.lr_min);
    Rng dropout_rng = make_rng(cfg.seed, 1000003);

    double lr = cfg.learning_rate;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto& batch : batch_indices(train_set.size(), cfg.batch_size, cfg.seed, epoch)) {
            model.zero_grad();
            double batch_loss = 0.0;
            for (const std::size_t idx : batch) {
                const LabeledSlice& s = train_set[idx];
                const TensorF probs = model.forward(s.image, Mode::Train, dropout_rng);
                batch_loss += weighted_ce_loss(probs, s.label, result.class_weights, &result.prob_clamp_events);
                if (argmax_class(probs.data(), probs.size()) == s.label) ++correct;
                model.backward(fused_ce_dlogits(probs, s.label, result.class_weights, batch.size()));
            }
            batch_loss /= static_cast<double>(batch.size());
            if (!std::isfinite(batch_loss)) throw NumericError("non-finite training loss");
            loss_sum += batch_loss * static_cast<double>(batch.size());
            opt.step(lr);
        }
        const EvalPassResult val = eval_pass(model, val_set, result.class_weights, &result.prob_clamp_events,
                                             dropout_rng);
        if (!std::isfinite(val.mean_loss)) throw NumericError("non-finite validation loss");
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = loss_sum / static_cast<double>(train_set.size());
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
        stats.val_loss = val.mean_loss;
        stats.val_acc = val.accuracy;
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
        lr = sched.update(val.mean_loss);
    }
    result.final_lr = lr;
    return result;
}

std::vector<SlicePrediction> predict_slices(ModelF& model, const std::vector<LabeledSlice>& slices) {
    Rng rng = make_rng(0);
    std::vector<SlicePrediction> out;
    out.reserve(slices.size());
    for (const LabeledSlice& s : slices) {
        const TensorF probs = model.forward(s.image, Mode::Eval, rng);
        SlicePrediction p;
        p.patient_id = s.patient_id;
        p.truth = s.label;
        p.pred = argmax_class(probs.data(), probs.size());
        p.probs.assign(probs.data(), probs.data() + probs.size());
        out.push_back(std::move(p));
    }
    return out;
}

EvaluationReport evaluate_slices(ModelF& model, const std::vector<LabeledSlice>& slices) {
    const std::vector<SlicePrediction> preds = predict_slices(model, slices);
    std::vector<int> truths, predicted;
    truths.reserve(preds.size());
    predicted.reserve(preds.size());
    for (const auto& p : preds) {
        truths.push_back(p.truth);
        predicted.push_back(p.pred);
    }
    const std::size_t k = model.config().num_classes;
    std::vector<std::string> names;
    if (k == static_cast<std::size_t>(kNumCategories)) {
        for (int c = 0; c < kNumCategories; ++c) names.push_back(category_display_name(static_cast<CacCategory>(c)));
    }
    return per_class_metrics(confusion_matrix(truths, predicted, k, std::move(names)));
}

CvResult run_cross_validation(const Dataset& ds, std::size_t k, const TrainConfig& tcfg, const ModelConfig& mcfg) {
    tcfg.validate();
    mcfg.validate();
    const std::vector<std::string> ids = ds.study_ids();
    CvResult out;
    out.folds = kfold_patients(ids, k, tcfg.seed);
    check_folds_exclusive(out.folds);

    ConfusionMatrix pooled;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::string> pool;
        for (std::size_t other = 0; other < k; ++other) {
            if (other == f) continue;
            pool.insert(pool.end(), out.folds.folds[other].begin(), out.folds.folds[other].end());
        }
        if (pool.size() < 2) throw ConfigError("cross-validation needs at least 2 training patients per fold");
        // Internal patient-level carve so the plateau scheduler has a
        // validation signal; the held-out fold stays untouched.
        Rng carve_rng = make_rng(tcfg.seed, 500000 + f);
        std::shuffle(pool.begin(), pool.end(), carve_rng);
        std::size_t n_val = std::max<std::size_t>(1, (pool.size() * 3 + 5) / 10);
        if (n_val >= pool.size()) n_val = pool.size() - 1;
        const std::vector<std::string> val_ids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
        const std::vector<std::string> train_ids(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());

        ModelF model(mcfg, mix_seed(tcfg.seed, f));
        CvFoldResult fold;
        fold.held_out_ids = out.folds.folds[f];
        fold.training = train(model, make_labeled_slices(ds, train_ids), make_labeled_slices(ds, val_ids), tcfg);
        fold.report = evaluate_slices(model, make_labeled_slices(ds, fold.held_out_ids));
        if (f == 0) {
            pooled = fold.report.confusion;
        } else {
            for (std::size_t i = 0; i < pooled.counts.size(); ++i) pooled.counts[i] += fold.report.confusion.counts[i];
        }
        out.fold_results.push_back(std::move(fold));
    }
    out.pooled = per_class_metrics(pooled);
    return out;
}

}  // namespace cacnet
