#include "doctest.h"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cacnet/errors.hpp"
#include "cacnet/metrics.hpp"
#include "cacnet/rng.hpp"

using namespace cacnet;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m;
    m.k = rows.size();
    for (const auto& r : rows)
        for (auto v : r) m.counts.push_back(v);
    for (std::size_t c = 0; c < m.k; ++c) m.class_names.push_back("class_" + std::to_string(c));
    return m;
}

// Reconstruction of a published 6-class result from its row totals and
// diagonal; off-diagonal mass parked in an adjacent column. Accuracy and
// kappa depend only on trace, row sums, and col sums.
ConfusionMatrix reconstructed_matrix() {
    const std::uint64_t totals[6] = {244, 142, 216, 252, 230, 301};
    const std::uint64_t diag[6] = {240, 142, 206, 238, 227, 286};
    ConfusionMatrix m;
    m.k = 6;
    m.counts.assign(36, 0);
    for (std::size_t c = 0; c < 6; ++c) m.class_names.push_back("class_" + std::to_string(c));
    for (std::size_t r = 0; r < 6; ++r) {
        m.at(r, r) = diag[r];
        const std::uint64_t miss = totals[r] - diag[r];
        m.at(r, r == 5 ? 4 : r + 1) += miss;
    }
    return m;
}

}  // namespace

TEST_CASE("hand-worked 2x2 example: accuracy 0.7, kappa 0.4") {
    const auto m = from_rows({{40, 10}, {20, 30}});
    CHECK(m.total() == 100);
    CHECK(m.trace() == 70);
    CHECK(m.row_sum(0) == 50);
    CHECK(m.col_sum(0) == 60);

    const EvaluationReport r = per_class_metrics(m);
    CHECK(r.accuracy == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(r.kappa == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(r.precision[0] == doctest::Approx(40.0 / 60.0).epsilon(1e-15));
    CHECK(r.precision[1] == doctest::Approx(30.0 / 40.0).epsilon(1e-15));
    CHECK(r.recall[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.recall[1] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r.f1[0] == doctest::Approx(8.0 / 11.0).epsilon(1e-12));
    CHECK(r.f1[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.support == std::vector<std::uint64_t>{50, 50});
    CHECK_FALSE(r.kappa_degenerate);
}

TEST_CASE("reconstructed 6-class matrix yields accuracy 1339/1385") {
    const auto m = reconstructed_matrix();
    CHECK(m.total() == 1385);
    CHECK(m.trace() == 1339);
    const EvaluationReport r = per_class_metrics(m);
    CHECK(r.accuracy == 1339.0 / 1385.0);
    CHECK(r.accuracy == doctest::Approx(0.9668).epsilon(5e-5));
    CHECK(r.kappa > 0.95);
    CHECK(r.kappa < 1.0);
    CHECK(r.recall[1] == 1.0);  // 142 of 142
    CHECK(r.recall[0] == doctest::Approx(240.0 / 244.0).epsilon(1e-15));
}

TEST_CASE("confusion_matrix places pairs at (truth, prediction)") {
    const auto m = confusion_matrix({0, 0, 1}, {0, 1, 1}, 2);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 1);
    CHECK(m.at(1, 0) == 0);
    CHECK(m.at(1, 1) == 1);
    CHECK(m.class_names == std::vector<std::string>{"class_0", "class_1"});

    CHECK_THROWS_AS(confusion_matrix({0}, {0, 1}, 2), DataError);
    CHECK_THROWS_AS(confusion_matrix({}, {}, 2), DataError);
    CHECK_THROWS_AS(confusion_matrix({0, 2}, {0, 0}, 2), DataError);
    CHECK_THROWS_AS(confusion_matrix({0, -1}, {0, 0}, 2), DataError);
    CHECK_THROWS_AS(confusion_matrix({0}, {0}, 2, {"only_one"}), DataError);
}

TEST_CASE("independence and perfection endpoints of kappa") {
    CHECK(cohens_kappa(from_rows({{25, 25}, {25, 25}})) == 0.0);
    const auto perfect = from_rows({{10, 0, 0}, {0, 20, 0}, {0, 0, 30}});
    CHECK(cohens_kappa(perfect) == 1.0);
    const EvaluationReport r = per_class_metrics(perfect);
    CHECK(r.accuracy == 1.0);
    CHECK(r.kappa == 1.0);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(r.precision[c] == 1.0);
        CHECK(r.recall[c] == 1.0);
        CHECK(r.f1[c] == 1.0);
    }
}

TEST_CASE("degenerate kappa when expected agreement saturates") {
    // Everything in one diagonal cell: p_e == 1 and p_o == 1.
    bool degen = false;
    CHECK(cohens_kappa(from_rows({{50, 0}, {0, 0}}), &degen) == 1.0);
    CHECK(degen);
    CHECK(per_class_metrics(from_rows({{50, 0}, {0, 0}})).kappa_degenerate);

    // Everything in one off-diagonal cell: marginals disagree, so p_e == 0
    // and the ordinary formula applies: kappa = (0 - 0) / 1 = 0.
    degen = true;
    CHECK(cohens_kappa(from_rows({{0, 50}, {0, 0}}), &degen) == 0.0);
    CHECK_FALSE(degen);
}

TEST_CASE("accuracy equals the support-weighted mean recall") {
    auto rng = make_rng(5, 0);
    std::uniform_int_distribution<int> lab(0, 4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> truths, preds;
        for (int i = 0; i < 200; ++i) {
            truths.push_back(lab(rng));
            preds.push_back(lab(rng));
        }
        const EvaluationReport r = per_class_metrics(confusion_matrix(truths, preds, 5));
        double weighted = 0.0;
        for (std::size_t c = 0; c < 5; ++c) weighted += static_cast<double>(r.support[c]) * r.recall[c];
        CHECK(r.accuracy == doctest::Approx(weighted / 200.0).epsilon(1e-12));
    }
}

TEST_CASE("matrix is invariant under observation order") {
    auto rng = make_rng(6, 0);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> truths, preds;
    for (int i = 0; i < 100; ++i) {
        truths.push_back(lab(rng));
        preds.push_back(lab(rng));
    }
    const auto base = confusion_matrix(truths, preds, 4);
    std::vector<std::size_t> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t2, p2;
    for (auto i : perm) {
        t2.push_back(truths[i]);
        p2.push_back(preds[i]);
    }
    CHECK(confusion_matrix(t2, p2, 4).counts == base.counts);
}

TEST_CASE("zero denominators produce flagged zeros, not NaNs") {
    // Class 2 never appears as truth or prediction; class 1 never predicted.
    const auto m = from_rows({{5, 0, 0}, {3, 0, 0}, {0, 0, 0}});
    const EvaluationReport r = per_class_metrics(m);
    CHECK(r.recall[2] == 0.0);
    CHECK(r.recall_zero_den[2]);
    CHECK(r.precision[1] == 0.0);
    CHECK(r.precision_zero_den[1]);
    CHECK(r.precision[2] == 0.0);
    CHECK(r.precision_zero_den[2]);
    CHECK(r.support == std::vector<std::uint64_t>{5, 3, 0});
    // Macro averages only over classes with support.
    CHECK(r.macro_recall == doctest::Approx((1.0 + 0.0) / 2.0).epsilon(1e-15));
    for (double v : r.precision) CHECK(v == v);  // no NaN
    for (double v : r.f1) CHECK(v == v);
}

TEST_CASE("report JSON round trip is lossless") {
    const EvaluationReport r = per_class_metrics(reconstructed_matrix());
    const EvaluationReport back = report_from_json(report_to_json(r));
    CHECK(back.confusion.counts == r.confusion.counts);
    CHECK(back.confusion.class_names == r.confusion.class_names);
    CHECK(back.precision == r.precision);
    CHECK(back.recall == r.recall);
    CHECK(back.f1 == r.f1);
    CHECK(back.support == r.support);
    CHECK(back.macro_precision == r.macro_precision);
    CHECK(back.macro_recall == r.macro_recall);
    CHECK(back.macro_f1 == r.macro_f1);
    CHECK(back.accuracy == r.accuracy);
    CHECK(back.kappa == r.kappa);
    CHECK(back.kappa_degenerate == r.kappa_degenerate);
    CHECK_THROWS_AS(report_from_json(json::object()), ManifestError);
}

TEST_CASE("rendered table rounds to three decimals") {
    EvaluationReport r = per_class_metrics(from_rows({{9648, 352}, {0, 10000}}));
    // recall[0] = 0.9648 -> "0.965"
    const std::string table = render_report_table(r);
    CHECK(table.find("0.965") != std::string::npos);
    CHECK(table.find("Average") != std::string::npos);
    CHECK(table.find("Support") != std::string::npos);

    const std::string perfect = render_report_table(per_class_metrics(from_rows({{3, 0}, {0, 4}})));
    CHECK(perfect.find("1.000") != std::string::npos);
    CHECK(perfect.find("accuracy 1.000") != std::string::npos);
    CHECK(perfect.find("kappa 1.000") != std::string::npos);
}
