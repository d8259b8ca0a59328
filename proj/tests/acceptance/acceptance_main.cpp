// Acceptance gate for the full pipeline. Runs nine independent checks and
// prints one "criterion N (<label>): pass|FAIL" line each; exits nonzero if
// any fails. argv[1] = trained CLI binary, argv[2] = scratch directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cacnet/agatston.hpp"
#include "cacnet/checkpoint.hpp"
#include "cacnet/data.hpp"
#include "cacnet/fsio.hpp"
#include "cacnet/kernels.hpp"
#include "cacnet/layers.hpp"
#include "cacnet/metrics.hpp"
#include "cacnet/model.hpp"
#include "cacnet/phantom.hpp"
#include "cacnet/rng.hpp"
#include "cacnet/training.hpp"

using namespace cacnet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, const char* label, bool ok, const std::string& detail) {
    std::printf("criterion %d (%s): %s%s%s\n", n, label, ok ? "pass" : "FAIL", detail.empty() ? "" : " -- ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-12, std::abs(a) + std::abs(b)); }

// ---------------------------------------------------------------- criterion 1

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg;  // default architecture on a reduced 32x32 input
    cfg.input_h = cfg.input_w = 32;
    Model<double> model(cfg, 12345);

    TensorD x({1, 32, 32});
    auto xrng = make_rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = unit(xrng);
    const int label = 3;
    const std::vector<double> weights = {1.2, 0.8, 1.0, 1.0, 1.1, 0.9};
    const std::uint64_t mask_seed = 77;  // frozen dropout mask per evaluation

    auto loss_at = [&]() {
        Rng rng = make_rng(mask_seed);
        const TensorD p = model.forward(x, Mode::Train, rng);
        return static_cast<double>(weighted_ce_loss(p, label, weights));
    };

    {
        Rng rng = make_rng(mask_seed);
        const TensorD p = model.forward(x, Mode::Train, rng);
        model.zero_grad();
        model.backward(fused_ce_dlogits(p, label, weights, 1));
    }

    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_group;
    auto probe_rng = make_rng(991);
    for (auto& group : model.param_groups()) {
        const std::size_t n = group.value->size();
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t idx[3] = {0, pick(probe_rng), n - 1};
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t i = idx[j];
            const double saved = (*group.value)[i];
            (*group.value)[i] = saved + h;
            const double up = loss_at();
            (*group.value)[i] = saved - h;
            const double dn = loss_at();
            (*group.value)[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double an = (*group.grad)[i];
            const double err = rel_err(fd, an);
            if (err > worst) {
                worst = err;
                worst_group = group.name;
            }
        }
    }
    const double secs = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "max rel err %.3e (%s), %.1fs", worst, worst_group.c_str(), secs);
    report(1, "full-network finite-difference gradients", worst < 1e-4 && secs < 120.0, detail);
}

// ---------------------------------------------------------------- criterion 2

template <typename F>
double fill_random(Tensor<double>& t, F& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = unit(rng);
    return 0.0;
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void criterion_adjoints() {
    auto rng = make_rng(31337);
    double worst = 0.0;
    std::string worst_what;
    auto note = [&](const char* what, double lhs, double rhs) {
        const double err = rel_err(lhs, rhs);
        if (err > worst) {
            worst = err;
            worst_what = what;
        }
    };

    // im2col/col2im transpose pair, 100 random geometries.
    std::uniform_int_distribution<std::size_t> cdist(1, 4), hdist(3, 12), kdist(1, 3), sdist(1, 2), pdist(0, 1);
    for (int probe = 0; probe < 100; ++probe) {
        ConvGeometry g;
        g.channels = cdist(rng);
        g.height = hdist(rng);
        g.width = hdist(rng);
        g.kernel_h = g.kernel_w = kdist(rng);
        g.pad_h = g.pad_w = pdist(rng);
        g.stride_h = g.stride_w = sdist(rng);
        if (g.kernel_h > g.height + 2 * g.pad_h || g.kernel_w > g.width + 2 * g.pad_w) {
            --probe;
            continue;
        }
        TensorD x({g.channels, g.height, g.width});
        fill_random(x, rng);
        const TensorD cols = im2col(x, g);
        TensorD y(cols.shape());
        fill_random(y, rng);
        note("im2col/col2im", dot(cols, y), dot(x, col2im(y, g)));
    }

    // Convolution: affine in the input, so a forward difference is the exact
    // directional derivative.
    for (int probe = 0; probe < 20; ++probe) {
        ConvGeometry g;
        g.channels = 3;
        g.height = g.width = 8;
        g.kernel_h = g.kernel_w = 3;
        g.pad_h = g.pad_w = 1;
        Conv2D<double> conv(g, 5);
        auto wrng = make_rng(400 + static_cast<std::uint64_t>(probe));
        fill_random(conv.w, wrng);
        fill_random(conv.b, wrng);
        TensorD x({3, 8, 8}), dx({3, 8, 8});
        fill_random(x, rng);
        fill_random(dx, rng);
        TensorD xp = x;
        for (std::size_t i = 0; i < x.size(); ++i) xp[i] += dx[i];
        const TensorD y1 = conv.forward(xp);
        const TensorD y0 = conv.forward(x);  // leaves caches consistent with x
        TensorD jvp(y0.shape());
        for (std::size_t i = 0; i < y0.size(); ++i) jvp[i] = y1[i] - y0[i];
        TensorD dy(y0.shape());
        fill_random(dy, rng);
        const TensorD dxg = conv.backward(dy);
        note("conv", dot(dy, jvp), dot(dx, dxg));
    }

    // Dense layer, same affine argument.
    for (int probe = 0; probe < 15; ++probe) {
        Dense<double> dense(7, 11);
        auto wrng = make_rng(500 + static_cast<std::uint64_t>(probe));
        fill_random(dense.w, wrng);
        fill_random(dense.b, wrng);
        TensorD x({11}), dx({11}), dy({7});
        fill_random(x, rng);
        fill_random(dx, rng);
        fill_random(dy, rng);
        TensorD xp = x;
        for (std::size_t i = 0; i < 11; ++i) xp[i] += dx[i];
        const TensorD y1 = dense.forward(xp);
        const TensorD y0 = dense.forward(x);
        TensorD jvp(y0.shape());
        for (std::size_t i = 0; i < 7; ++i) jvp[i] = y1[i] - y0[i];
        const TensorD dxg = dense.backward(dy);
        note("dense", dot(dy, jvp), dot(dx, dxg));
    }

    // ReLU: keep inputs away from the kink so it is locally linear.
    for (int probe = 0; probe < 15; ++probe) {
        ReLU<double> relu;
        TensorD x({40}), dx({40}), dy({40});
        fill_random(x, rng);
        for (std::size_t i = 0; i < 40; ++i)
            if (std::abs(x[i]) < 0.05) x[i] += x[i] < 0 ? -0.1 : 0.1;
        fill_random(dx, rng);
        fill_random(dy, rng);
        for (std::size_t i = 0; i < 40; ++i) dx[i] *= 1e-3;
        TensorD xp = x;
        for (std::size_t i = 0; i < 40; ++i) xp[i] += dx[i];
        const TensorD y1 = relu.forward(xp);
        const TensorD y0 = relu.forward(x);
        TensorD jvp(y0.shape());
        for (std::size_t i = 0; i < 40; ++i) jvp[i] = y1[i] - y0[i];
        note("relu", dot(dy, jvp), dot(dx, relu.backward(dy)));
    }

    // Max pooling: enforce a winner margin in every 2x2 window first.
    for (int probe = 0; probe < 15; ++probe) {
        MaxPool2x2<double> pool;
        TensorD x({2, 6, 6});
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = unit(rng);
        for (std::size_t c = 0; c < 2; ++c) {
            for (std::size_t y = 0; y < 6; y += 2) {
                for (std::size_t xx = 0; xx < 6; xx += 2) {
                    std::size_t best = 0;
                    double bv = -1.0;
                    for (std::size_t dyy = 0; dyy < 2; ++dyy)
                        for (std::size_t dxx = 0; dxx < 2; ++dxx) {
                            const std::size_t i = (c * 6 + y + dyy) * 6 + xx + dxx;
                            if (x[i] > bv) {
                                bv = x[i];
                                best = i;
                            }
                        }
                    x[best] += 0.5;  // clear margin over the runner-up
                }
            }
        }
        TensorD dx(x.shape());
        fill_random(dx, rng);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1e-3;
        TensorD xp = x;
        for (std::size_t i = 0; i < x.size(); ++i) xp[i] += dx[i];
        const TensorD y1 = pool.forward(xp);
        const TensorD y0 = pool.forward(x);
        TensorD jvp(y0.shape()), dy(y0.shape());
        for (std::size_t i = 0; i < y0.size(); ++i) jvp[i] = y1[i] - y0[i];
        fill_random(dy, rng);
        note("maxpool", dot(dy, jvp), dot(dx, pool.backward(dy)));
    }

    // Dropout with its mask frozen from the forward pass.
    for (int probe = 0; probe < 15; ++probe) {
        Dropout<double> drop(0.3);
        TensorD x({64}), dx({64}), dy({64});
        fill_random(x, rng);
        fill_random(dx, rng);
        fill_random(dy, rng);
        Rng mrng = make_rng(900 + static_cast<std::uint64_t>(probe));
        drop.forward(x, Mode::Train, mrng);
        TensorD jvp({64});
        for (std::size_t i = 0; i < 64; ++i) jvp[i] = dx[i] * drop.scaled_mask[i];
        note("dropout", dot(dy, jvp), dot(dx, drop.backward(dy, Mode::Train)));
    }

    // Softmax backward against a central-difference JVP.
    for (int probe = 0; probe < 20; ++probe) {
        TensorD x({6}), dx({6}), dy({6});
        fill_random(x, rng);
        fill_random(dx, rng);
        fill_random(dy, rng);
        const double h = 1e-6;
        TensorD xp = x, xm = x;
        for (std::size_t i = 0; i < 6; ++i) {
            xp[i] += h * dx[i];
            xm[i] -= h * dx[i];
        }
        const TensorD pp = softmax(xp), pm = softmax(xm);
        TensorD jvp({6});
        for (std::size_t i = 0; i < 6; ++i) jvp[i] = (pp[i] - pm[i]) / (2.0 * h);
        const TensorD vjp = softmax_backward(softmax(x), dy);
        note("softmax", dot(dy, jvp), dot(dx, vjp));
    }

    char detail[128];
    std::snprintf(detail, sizeof(detail), "max rel mismatch %.3e (%s)", worst, worst_what.c_str());
    report(2, "layer and im2col/col2im adjoint identities", worst <= 1e-8, detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion_metrics() {
    bool ok = true;
    std::string detail;

    ConfusionMatrix m;
    m.k = 2;
    m.counts = {40, 10, 20, 30};
    m.class_names = {"a", "b"};
    const EvaluationReport r = per_class_metrics(m);
    if (r.accuracy != 0.7) {
        ok = false;
        detail = "2x2 accuracy " + std::to_string(r.accuracy);
    }
    if (std::abs(r.kappa - 0.4) > 1e-12) {
        ok = false;
        detail += " 2x2 kappa " + std::to_string(r.kappa);
    }

    const std::uint64_t totals[6] = {244, 142, 216, 252, 230, 301};
    const std::uint64_t diag[6] = {240, 142, 206, 238, 227, 286};
    ConfusionMatrix big;
    big.k = 6;
    big.counts.assign(36, 0);
    for (std::size_t c = 0; c < 6; ++c) big.class_names.push_back("c" + std::to_string(c));
    for (std::size_t row = 0; row < 6; ++row) {
        big.at(row, row) = diag[row];
        big.at(row, row == 5 ? 4 : row + 1) += totals[row] - diag[row];
    }
    const EvaluationReport rb = per_class_metrics(big);
    if (rb.accuracy != 1339.0 / 1385.0 || std::abs(rb.accuracy - 0.9668) > 5e-5) {
        ok = false;
        detail += " 6x6 accuracy " + std::to_string(rb.accuracy);
    }
    if (ok) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "kappa %.6f, reconstructed accuracy %.6f", r.kappa, rb.accuracy);
        detail = buf;
    }
    report(3, "metric oracles", ok, detail);
}

// ---------------------------------------------------------------- criterion 4

void criterion_agatston_closure() {
    const auto t0 = std::chrono::steady_clock::now();
    int exact = 0, categorized = 0;
    for (int i = 0; i < 50; ++i) {
        PhantomSpec spec;
        spec.target_category = static_cast<CacCategory>(i % 6);
        spec.slices = 6;
        spec.seed = 1000 + static_cast<std::uint64_t>(i);
        const Phantom p = generate_phantom(spec);
        const double scored = agatston_study_score(p.volume, p.volume.cardiac_roi).total;
        if (scored == p.truth.analytic_score) ++exact;
        if (categorize(scored) == spec.target_category) ++categorized;
    }
    const double secs = seconds_since(t0);
    char detail[128];
    std::snprintf(detail, sizeof(detail), "%d/50 exact, %d/50 categorized, %.1fs", exact, categorized, secs);
    report(4, "Agatston closure on seeded phantoms", exact == 50 && categorized == 50 && secs < 60.0, detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion_distractor_bias() {
    int ge = 0, strict = 0, with_pixels = 0;
    const int n = 24;
    for (int i = 0; i < n; ++i) {
        PhantomSpec spec;
        spec.target_category = static_cast<CacCategory>(i % 6);
        spec.slices = 6;
        spec.include_bone_distractors = true;
        spec.seed = 2000 + static_cast<std::uint64_t>(i);
        const Phantom p = generate_phantom(spec);
        const double roi = agatston_study_score(p.volume, p.volume.cardiac_roi).total;
        const double whole = agatston_study_score(p.volume).total;
        if (whole >= roi) ++ge;
        if (p.truth.distractor_pixels > 0) {
            ++with_pixels;
            if (whole > roi) ++strict;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "%d/%d whole>=roi, %d/%d strict among distractor carriers", ge, n, strict,
                  with_pixels);
    report(5, "distractor score bias direction", ge == n && with_pixels > 0 && strict == with_pixels, detail);
}

// ---------------------------------------------------------------- criterion 6

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

bool run_cmd(const std::string& cmd) { return std::system(cmd.c_str()) == 0; }

void criterion_end_to_end(const std::string& cli, const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = work / "e2e";
    fs::remove_all(dir);
    fs::create_directories(dir);

    bool ok = true;
    std::string detail;
    const std::string log = " >> " + q(dir / "cli.log") + " 2>&1";
    ok = ok && run_cmd(cli + " gen-phantoms --out " + q(dir / "data") + " --patients 60 --seed 7 --slices 32" + log);
    ok = ok && run_cmd(cli + " split --data " + q(dir / "data") + " --out " + q(dir / "splits.json") + " --seed 7" + log);
    ok = ok && run_cmd(cli + " train --data " + q(dir / "data") + " --splits " + q(dir / "splits.json") + " --out " +
                       q(dir / "run") + " --seed 7" + log);
    ok = ok && run_cmd(cli + " eval --data " + q(dir / "data") + " --splits " + q(dir / "splits.json") + " --model " +
                       q(dir / "run" / "model.ckpt") + " --out " + q(dir / "eval") + " --partition test" + log);
    if (!ok) {
        report(6, "end-to-end training run", false, "a CLI step failed, see e2e/cli.log");
        return;
    }
    double accuracy = 0.0, kappa = 0.0;
    try {
        const json rep = read_json_file(dir / "eval" / "report.json");
        accuracy = rep.at("accuracy").get<double>();
        kappa = rep.at("kappa").get<double>();
    } catch (const std::exception& e) {
        report(6, "end-to-end training run", false, std::string("report unreadable: ") + e.what());
        return;
    }
    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "test accuracy %.4f (>= 0.80), kappa %.4f (>= 0.75), %.0fs (< 1800)", accuracy,
                  kappa, secs);
    report(6, "end-to-end training run", accuracy >= 0.80 && kappa >= 0.75 && secs < 1800.0, buf);
}

// ---------------------------------------------------------------- criterion 7

void criterion_protocol() {
    bool ok = true;
    std::string detail;

    PlateauScheduler sched(1e-4, 0.5, 2, 1e-6);
    sched.update(1.0);
    if (sched.update(1.1) != 1e-4) ok = false;   // one bad epoch: unchanged
    if (sched.update(1.2) != 5e-5) ok = false;   // two straight: halved
    PlateauScheduler floor(2e-6, 0.5, 1, 1e-6);
    floor.update(1.0);
    if (floor.update(2.0) != 1e-6) ok = false;
    if (floor.update(3.0) != 1e-6) ok = false;  // pinned at the floor
    if (!ok) detail += "scheduler trace;";

    std::vector<std::string> ids;
    for (int i = 0; i < 68; ++i) ids.push_back("p" + std::to_string(i));
    const double fr[3] = {0.49, 0.21, 0.30};
    const SplitManifest split = split_patients(ids, fr, 7);
    if (split.train.size() != 34 || split.val.size() != 14 || split.test.size() != 20) {
        ok = false;
        detail += " split sizes " + std::to_string(split.train.size()) + "/" + std::to_string(split.val.size()) + "/" +
                  std::to_string(split.test.size()) + ";";
    }
    try {
        check_split_exclusive(split);
    } catch (const LeakageError&) {
        ok = false;
        detail += " split leakage;";
    }

    const FoldManifest folds = kfold_patients(ids, 5, 7);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds.folds) sizes.push_back(f.size());
    if (sizes != std::vector<std::size_t>{14, 14, 14, 13, 13}) {
        ok = false;
        detail += " fold sizes;";
    }
    std::size_t covered = 0;
    for (const auto& f : folds.folds) covered += f.size();
    try {
        check_folds_exclusive(folds);
    } catch (const LeakageError&) {
        ok = false;
        detail += " fold leakage;";
    }
    if (covered != 68) {
        ok = false;
        detail += " fold coverage;";
    }
    if (ok) detail = "scheduler halves then floors; 68 -> 34/14/20; folds 14/14/14/13/13, exclusive";
    report(7, "protocol fidelity", ok, detail);
}

// ---------------------------------------------------------------- criterion 8

void criterion_determinism(const std::string& cli, const fs::path& work) {
    const fs::path dir = work / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string log = " >> " + q(dir / "cli.log") + " 2>&1";

    bool ok = run_cmd(cli + " gen-phantoms --out " + q(dir / "data") + " --patients 12 --seed 11 --slices 6" + log);
    ok = ok && run_cmd(cli + " split --data " + q(dir / "data") + " --out " + q(dir / "splits.json") + " --seed 11" + log);
    for (int r = 0; r < 2 && ok; ++r) {
        const fs::path run = dir / ("run" + std::to_string(r));
        ok = run_cmd(cli + " train --data " + q(dir / "data") + " --splits " + q(dir / "splits.json") + " --out " +
                     q(run) + " --seed 11 --epochs 2" + log) &&
             run_cmd(cli + " eval --data " + q(dir / "data") + " --splits " + q(dir / "splits.json") + " --model " +
                     q(run / "model.ckpt") + " --out " + q(run) + " --partition test" + log);
    }
    if (!ok) {
        report(8, "bitwise determinism across identical runs", false, "a CLI step failed, see determinism/cli.log");
        return;
    }
    std::string detail;
    for (const char* f : {"model.ckpt", "history.jsonl", "report.json"}) {
        const std::string a = read_file_bytes(dir / "run0" / f);
        const std::string b = read_file_bytes(dir / "run1" / f);
        if (a != b) {
            ok = false;
            detail += std::string(f) + " differs;";
        }
    }
    if (ok) detail = "model.ckpt, history.jsonl, report.json byte-identical";
    report(8, "bitwise determinism across identical runs", ok, detail);
}

// ---------------------------------------------------------------- criterion 9

void criterion_checkpoint_round_trip(const fs::path& work) {
    ModelConfig cfg;
    cfg.input_h = cfg.input_w = 32;
    cfg.conv_filters = {8, 16};
    cfg.dense_units = 32;
    cfg.num_classes = 6;
    ModelF model(cfg, 97);
    const fs::path path = work / "round_trip.ckpt";
    save_checkpoint(model, CheckpointProvenance{}, path);
    LoadedCheckpoint loaded = load_checkpoint(path);

    auto rng = make_rng(0);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    int identical = 0;
    for (int i = 0; i < 100; ++i) {
        TensorF x({1, 32, 32});
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = unit(rng);
        const TensorF a = model.forward(x, Mode::Eval, rng);
        const TensorF b = loaded.model.forward(x, Mode::Eval, rng);
        if (a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0) ++identical;
    }
    char detail[64];
    std::snprintf(detail, sizeof(detail), "%d/100 inputs bitwise identical", identical);
    report(9, "checkpoint round-trip predictions", identical == 100, detail);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <cacnet-cli> <work-dir>\n", argv[0]);
        return 2;
    }
    const std::string cli = q(fs::path(argv[1]));
    const fs::path work(argv[2]);
    fs::create_directories(work);

    criterion_gradients();
    criterion_adjoints();
    criterion_metrics();
    criterion_agatston_closure();
    criterion_distractor_bias();
    criterion_end_to_end(cli, work);
    criterion_protocol();
    criterion_determinism(cli, work);
    criterion_checkpoint_round_trip(work);

    if (g_failures == 0) {
        std::printf("acceptance: all 9 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
    return 1;
}
