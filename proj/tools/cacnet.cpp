// cacnet: generate phantom datasets, score studies, split patients, train
// and evaluate the six-class calcium classifier, cross-validate, predict.
//
// Exit codes: 0 success, 2 usage/config, 3 data or I/O, 4 patient leakage.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cacnet/agatston.hpp"
#include "cacnet/checkpoint.hpp"
#include "cacnet/data.hpp"
#include "cacnet/fsio.hpp"
#include "cacnet/iniconfig.hpp"
#include "cacnet/metrics.hpp"
#include "cacnet/phantom.hpp"
#include "cacnet/training.hpp"

namespace fs = std::filesystem;
using namespace cacnet;

namespace {

// Everything a run needs, resolved from defaults, then the config file,
// then command-line flags (highest precedence).
struct RunConfig {
    TrainConfig tcfg;
    ModelConfig mcfg;
    std::string data, splits, out;
};

void apply_ini(RunConfig& rc, const IniFile& ini) {
    rc.tcfg.learning_rate = ini.get_double("train", "lr", rc.tcfg.learning_rate);
    rc.tcfg.epochs = ini.get_u64("train", "epochs", rc.tcfg.epochs);
    rc.tcfg.batch_size = ini.get_u64("train", "batch_size", rc.tcfg.batch_size);
    rc.tcfg.lr_factor = ini.get_double("train", "lr_factor", rc.tcfg.lr_factor);
    rc.tcfg.lr_patience = ini.get_u64("train", "lr_patience", rc.tcfg.lr_patience);
    rc.tcfg.lr_min = ini.get_double("train", "lr_min", rc.tcfg.lr_min);
    rc.tcfg.seed = ini.get_u64("train", "seed", rc.tcfg.seed);
    rc.mcfg.dropout_rate = ini.get_double("model", "dropout_rate", rc.mcfg.dropout_rate);
    rc.mcfg.dense_units = ini.get_u64("model", "dense_units", rc.mcfg.dense_units);
    rc.data = ini.get_string("paths", "data", rc.data);
    rc.splits = ini.get_string("paths", "splits", rc.splits);
    rc.out = ini.get_string("paths", "out", rc.out);
}

std::string num(double x) { return json(x).dump(); }

std::string resolved_config_text(const RunConfig& rc) {
    std::string s;
    s += "[train]\n";
    s += "lr = " + num(rc.tcfg.learning_rate) + "\n";
    s += "epochs = " + std::to_string(rc.tcfg.epochs) + "\n";
    s += "batch_size = " + std::to_string(rc.tcfg.batch_size) + "\n";
    s += "lr_factor = " + num(rc.tcfg.lr_factor) + "\n";
    s += "lr_patience = " + std::to_string(rc.tcfg.lr_patience) + "\n";
    s += "lr_min = " + num(rc.tcfg.lr_min) + "\n";
    s += "seed = " + std::to_string(rc.tcfg.seed) + "\n";
    s += "\n[model]\n";
    s += "dropout_rate = " + num(rc.mcfg.dropout_rate) + "\n";
    s += "dense_units = " + std::to_string(rc.mcfg.dense_units) + "\n";
    std::string filters;
    for (std::size_t f : rc.mcfg.conv_filters) filters += (filters.empty() ? "" : ",") + std::to_string(f);
    s += "conv_filters = " + filters + "\n";
    s += "num_classes = " + std::to_string(rc.mcfg.num_classes) + "\n";
    s += "\n[paths]\n";
    s += "data = " + rc.data + "\n";
    s += "splits = " + rc.splits + "\n";
    s += "out = " + rc.out + "\n";
    return s;
}

std::vector<std::string> list_study_ids(const std::string& data_dir) {
    if (!fs::is_directory(data_dir)) throw IoError("data directory not found: " + data_dir);
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw DataError("no studies (subdirectories with manifest.json) under " + data_dir);
    return ids;
}

void require_path(const std::string& value, const char* flag, const char* ini_key) {
    if (value.empty()) {
        throw ConfigError(std::string("no ") + ini_key + " configured; pass " + flag + " or set [paths] " + ini_key);
    }
}

void print_epoch(const EpochStats& e) {
    std::printf("epoch %2zu  lr %.2e  train loss %.4f acc %.3f  val loss %.4f acc %.3f\n", e.epoch, e.lr,
                e.train_loss, e.train_acc, e.val_loss, e.val_acc);
    std::fflush(stdout);
}

int run_gen(const std::string& out, std::size_t patients, const std::vector<double>& mix, std::uint64_t seed,
            bool distractors, std::size_t slices, double noise_std) {
    DatasetGenConfig cfg;
    cfg.n_patients = patients;
    for (std::size_t c = 0; c < kNumCategories; ++c) cfg.category_mix[c] = mix[c];
    cfg.seed = seed;
    cfg.include_bone_distractors = distractors;
    cfg.slices_override = slices;
    cfg.noise_std_hu = noise_std;
    const std::vector<std::size_t> counts = generate_dataset(cfg, out);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        std::printf("category %zu (%s): %zu patients\n", c, category_display_name(static_cast<CacCategory>(c)),
                    counts[c]);
    }
    std::printf("wrote %zu studies to %s (seed %llu)\n", patients, out.c_str(),
                static_cast<unsigned long long>(seed));
    return 0;
}

int run_score(const std::string& study, bool use_roi, const std::string& out) {
    const StudyVolume vol = load_study(study);
    Roi roi;
    if (use_roi) {
        if (vol.cardiac_roi.whole_slice()) {
            throw ConfigError("study " + vol.study_id + " has no cardiac_roi in its manifest; --roi unavailable");
        }
        roi = vol.cardiac_roi;
    }
    const StudyScore score = agatston_study_score(vol, roi);
    const CacCategory cat = categorize(score.total);
    json doc;
    doc["study_id"] = vol.study_id;
    doc["total_score"] = score.total;
    doc["category_index"] = static_cast<int>(cat);
    doc["category_name"] = category_display_name(cat);
    json per = json::array();
    for (const SliceScore& s : score.slices) per.push_back(s.score);
    doc["per_slice"] = std::move(per);
    std::cout << doc.dump(2) << "\n";
    if (!out.empty()) write_json_file(out, doc);
    return 0;
}

int run_split(const std::string& data, const std::string& out, std::uint64_t seed,
              const std::vector<double>& fractions) {
    const std::vector<std::string> ids = list_study_ids(data);
    const double fr[3] = {fractions[0], fractions[1], fractions[2]};
    const SplitManifest split = split_patients(ids, fr, seed);
    check_split_exclusive(split);
    write_json_file(out, split_to_json(split));
    std::printf("split %zu patients: train %zu, val %zu, test %zu -> %s\n", ids.size(), split.train.size(),
                split.val.size(), split.test.size(), out.c_str());
    return 0;
}

int run_train(const RunConfig& rc) {
    rc.tcfg.validate();
    rc.mcfg.validate();
    const Dataset ds = load_dataset(rc.data);
    const SplitManifest split = split_from_json(read_json_file(rc.splits));
    check_split_exclusive(split);
    const auto train_set = make_labeled_slices(ds, split.train);
    const auto val_set = make_labeled_slices(ds, split.val);
    std::printf("training on %zu slices (%zu patients), validating on %zu slices (%zu patients)\n",
                train_set.size(), split.train.size(), val_set.size(), split.val.size());
    std::fflush(stdout);

    ensure_dir(rc.out);
    const fs::path out_dir(rc.out);
    atomic_write_file(out_dir / "resolved_config.ini", resolved_config_text(rc));

    ModelF model(rc.mcfg, rc.tcfg.seed);
    const TrainResult result = train(model, train_set, val_set, rc.tcfg, print_epoch);

    CheckpointProvenance prov;
    prov.seed = rc.tcfg.seed;
    prov.epochs_completed = result.history.size();
    prov.final_lr = result.final_lr;
    prov.config_digest = config_digest(rc.mcfg, rc.tcfg);
    save_checkpoint(model, prov, out_dir / "model.ckpt");
    atomic_write_file(out_dir / "history.jsonl", history_to_jsonl(result.history));
    for (std::size_t c : result.zero_weight_classes) {
        std::printf("note: class %zu absent from training set; weight 0\n", c);
    }
    std::printf("saved %s and history.jsonl (final val acc %.3f)\n", (out_dir / "model.ckpt").string().c_str(),
                result.history.back().val_acc);
    return 0;
}

int run_eval(const std::string& data, const std::string& splits, const std::string& model_path,
             const std::string& out, const std::string& partition) {
    LoadedCheckpoint ck = load_checkpoint(model_path);
    const Dataset ds = load_dataset(data);
    const SplitManifest split = split_from_json(read_json_file(splits));
    check_split_exclusive(split);
    const std::vector<std::string>* ids = nullptr;
    if (partition == "train") ids = &split.train;
    else if (partition == "val") ids = &split.val;
    else if (partition == "test") ids = &split.test;
    else throw ConfigError("unknown partition \"" + partition + "\" (expected train, val, or test)");
    const auto slices = make_labeled_slices(ds, *ids);
    const EvaluationReport report = evaluate_slices(ck.model, slices);
    if (!out.empty()) {
        ensure_dir(out);
        write_json_file(fs::path(out) / "report.json", report_to_json(report));
    }
    std::cout << render_report_table(report);
    return 0;
}

int run_cv(const RunConfig& rc, std::size_t folds) {
    rc.tcfg.validate();
    rc.mcfg.validate();
    const Dataset ds = load_dataset(rc.data);
    const CvResult cv = run_cross_validation(ds, folds, rc.tcfg, rc.mcfg);
    ensure_dir(rc.out);
    const fs::path out_dir(rc.out);
    atomic_write_file(out_dir / "resolved_config.ini", resolved_config_text(rc));
    write_json_file(out_dir / "folds.json", folds_to_json(cv.folds));
    for (std::size_t f = 0; f < cv.fold_results.size(); ++f) {
        const CvFoldResult& fr = cv.fold_results[f];
        json doc;
        doc["fold"] = f;
        doc["held_out"] = fr.held_out_ids;
        doc["report"] = report_to_json(fr.report);
        write_json_file(out_dir / ("fold_" + std::to_string(f) + ".json"), doc);
        std::printf("fold %zu: %zu held-out patients, accuracy %.3f\n", f, fr.held_out_ids.size(),
                    fr.report.accuracy);
    }
    write_json_file(out_dir / "pooled.json", report_to_json(cv.pooled));
    std::cout << "pooled over " << folds << " folds:\n" << render_report_table(cv.pooled);
    return 0;
}

int run_predict(const std::string& model_path, const std::string& study, const std::string& out) {
    LoadedCheckpoint ck = load_checkpoint(model_path);
    const StudyVolume vol = load_study(study);
    const std::vector<TensorF> images = normalize_hu(vol);
    const std::size_t k = ck.model.config().num_classes;
    Rng rng = make_rng(0);  // eval mode never consumes it

    json slice_probs = json::array();
    json slice_classes = json::array();
    std::vector<double> mean(k, 0.0);
    for (const TensorF& img : images) {
        const TensorF probs = ck.model.forward(img, Mode::Eval, rng);
        json row = json::array();
        for (std::size_t c = 0; c < k; ++c) {
            row.push_back(probs[c]);
            mean[c] += probs[c];
        }
        slice_probs.push_back(std::move(row));
        slice_classes.push_back(argmax_class(probs.data(), k));
    }
    for (double& m : mean) m /= static_cast<double>(images.size());
    // First strict maximum wins, so ties resolve toward the lower class.
    std::size_t patient_class = 0;
    for (std::size_t c = 1; c < k; ++c) {
        if (mean[c] > mean[patient_class]) patient_class = c;
    }

    json doc;
    doc["study_id"] = vol.study_id;
    doc["num_slices"] = images.size();
    doc["slice_probs"] = std::move(slice_probs);
    doc["slice_classes"] = std::move(slice_classes);
    doc["mean_softmax"] = mean;
    doc["patient_class"] = patient_class;
    if (k == kNumCategories) {
        doc["patient_class_name"] = category_display_name(static_cast<CacCategory>(patient_class));
    }
    std::cout << doc.dump(2) << "\n";
    if (!out.empty()) write_json_file(out, doc);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coronary calcium scoring and six-class CNN pipeline"};
    app.require_subcommand(1);

    // gen-phantoms
    auto* gen = app.add_subcommand("gen-phantoms", "Generate a synthetic phantom dataset with known scores");
    std::string gen_out;
    std::size_t gen_patients = 60;
    std::vector<double> gen_mix(kNumCategories, 1.0 / kNumCategories);
    std::uint64_t gen_seed = 7;
    bool gen_distractors = true;
    std::size_t gen_slices = 0;
    double gen_noise = 15.0;
    gen->add_option("--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--patients", gen_patients, "Number of studies to generate");
    gen->add_option("--mix", gen_mix, "Six category fractions summing to 1")->expected(6)->delimiter(',');
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--distractors", gen_distractors, "Plant bone distractors outside the cardiac ROI");
    gen->add_option("--slices", gen_slices, "Slices per study (0: sample 56..96 per study)");
    gen->add_option("--noise-std", gen_noise, "Background noise sigma in HU");

    // score
    auto* score = app.add_subcommand("score", "Agatston-score one study");
    std::string score_study, score_out;
    bool score_roi = false;
    score->add_option("--study", score_study, "Study directory or manifest.json path")->required();
    score->add_flag("--roi", score_roi, "Restrict scoring to the manifest's cardiac ROI");
    score->add_option("--out", score_out, "Also write the JSON report here");

    // split
    auto* split = app.add_subcommand("split", "Write a patient-exclusive train/val/test split");
    std::string split_data, split_out;
    std::uint64_t split_seed = 7;
    std::vector<double> split_fractions = {0.49, 0.21, 0.30};
    split->add_option("--data", split_data, "Dataset directory")->required();
    split->add_option("--out", split_out, "Split manifest output path")->required();
    split->add_option("--seed", split_seed, "Shuffle seed");
    split->add_option("--fractions", split_fractions, "Train,val,test fractions")->expected(3)->delimiter(',');

    // shared train/cv options
    auto add_run_options = [](CLI::App* sub, std::string& config, std::string& data, std::string& out,
                              std::uint64_t& seed, std::size_t& epochs, double& lr, std::size_t& batch) {
        sub->add_option("--config", config, "INI config file ([train]/[model]/[paths])");
        sub->add_option("--data", data, "Dataset directory");
        sub->add_option("--out", out, "Output directory");
        sub->add_option("--seed", seed, "Training seed");
        sub->add_option("--epochs", epochs, "Training epochs");
        sub->add_option("--lr", lr, "Initial learning rate");
        sub->add_option("--batch", batch, "Batch size");
    };

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the classifier on the train/val partitions");
    std::string train_config, train_data, train_splits, train_out;
    std::uint64_t train_seed = 0;
    std::size_t train_epochs = 0, train_batch = 0;
    double train_lr = 0.0;
    add_run_options(train_cmd, train_config, train_data, train_out, train_seed, train_epochs, train_lr,
                    train_batch);
    train_cmd->add_option("--splits", train_splits, "Split manifest path");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one partition");
    std::string eval_data, eval_splits, eval_model, eval_out, eval_partition = "test";
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--splits", eval_splits, "Split manifest path")->required();
    eval_cmd->add_option("--model", eval_model, "Checkpoint path")->required();
    eval_cmd->add_option("--out", eval_out, "Directory for report.json (optional)");
    eval_cmd->add_option("--partition", eval_partition, "train, val, or test");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "Grouped k-fold cross-validation");
    std::string cv_config, cv_data, cv_out;
    std::uint64_t cv_seed = 0;
    std::size_t cv_epochs = 0, cv_batch = 0, cv_folds = 5;
    double cv_lr = 0.0;
    add_run_options(cv_cmd, cv_config, cv_data, cv_out, cv_seed, cv_epochs, cv_lr, cv_batch);
    cv_cmd->add_option("--folds", cv_folds, "Number of folds");

    // predict
    auto* predict = app.add_subcommand("predict", "Per-slice probabilities and a patient-level prediction");
    std::string predict_model, predict_study, predict_out;
    predict->add_option("--model", predict_model, "Checkpoint path")->required();
    predict->add_option("--study", predict_study, "Study directory or manifest.json path")->required();
    predict->add_option("--out", predict_out, "Also write the JSON report here");

    auto resolve_run = [](CLI::App* sub, const std::string& config, const std::string& data,
                          const std::string& out, std::uint64_t seed, std::size_t epochs, double lr,
                          std::size_t batch) {
        RunConfig rc;
        if (!config.empty()) apply_ini(rc, read_ini_file(config));
        if (sub->count("--data") > 0) rc.data = data;
        if (sub->count("--out") > 0) rc.out = out;
        if (sub->count("--seed") > 0) rc.tcfg.seed = seed;
        if (sub->count("--epochs") > 0) rc.tcfg.epochs = epochs;
        if (sub->count("--lr") > 0) rc.tcfg.learning_rate = lr;
        if (sub->count("--batch") > 0) rc.tcfg.batch_size = batch;
        return rc;
    };

    try {
        app.parse(argc, argv);
        if (*gen) return run_gen(gen_out, gen_patients, gen_mix, gen_seed, gen_distractors, gen_slices, gen_noise);
        if (*score) return run_score(score_study, score_roi, score_out);
        if (*split) return run_split(split_data, split_out, split_seed, split_fractions);
        if (*train_cmd) {
            RunConfig rc = resolve_run(train_cmd, train_config, train_data, train_out, train_seed, train_epochs,
                                       train_lr, train_batch);
            if (train_cmd->count("--splits") > 0) rc.splits = train_splits;
            require_path(rc.data, "--data", "data");
            require_path(rc.splits, "--splits", "splits");
            require_path(rc.out, "--out", "out");
            return run_train(rc);
        }
        if (*eval_cmd) return run_eval(eval_data, eval_splits, eval_model, eval_out, eval_partition);
        if (*cv_cmd) {
            RunConfig rc = resolve_run(cv_cmd, cv_config, cv_data, cv_out, cv_seed, cv_epochs, cv_lr, cv_batch);
            require_path(rc.data, "--data", "data");
            require_path(rc.out, "--out", "out");
            return run_cv(rc, cv_folds);
        }
        if (*predict) return run_predict(predict_model, predict_study, predict_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const LeakageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
