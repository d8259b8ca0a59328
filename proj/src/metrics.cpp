#include "cacnet/metrics.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

namespace cacnet {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k; ++i) s += at(i, i);
    return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t r) const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < k; ++c) s += at(r, c);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < k; ++r) s += at(r, c);
    return s;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truths, const std::vector<int>& preds, std::size_t k,
                                 std::vector<std::string> class_names) {
    if (truths.size() != preds.size()) {
        throw DataError("truth/prediction length mismatch: " + std::to_string(truths.size()) + " vs " +
                        std::to_string(preds.size()));
    }
    if (truths.empty()) throw DataError("cannot build a confusion matrix from zero observations");
    if (k == 0) throw DataError("confusion matrix needs k >= 1");
    ConfusionMatrix m;
    m.k = k;
    m.counts.assign(k * k, 0);
    if (class_names.empty()) {
        for (std::size_t c = 0; c < k; ++c) m.class_names.push_back("class_" + std::to_string(c));
    } else {
        if (class_names.size() != k) throw DataError("class name count does not match k");
        m.class_names = std::move(class_names);
    }
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const int t = truths[i], p = preds[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k) {
            throw DataError("label pair (" + std::to_string(t) + ", " + std::to_string(p) + ") out of range 0.." +
                            std::to_string(k - 1));
        }
        ++m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
    }
    return m;
}

double cohens_kappa(const ConfusionMatrix& m, bool* degenerate) {
    const std::uint64_t n = m.total();
    if (n == 0) throw DataError("cohens_kappa on an empty confusion matrix");
    const double total = static_cast<double>(n);
    const double po = static_cast<double>(m.trace()) / total;
    double pe = 0.0;
    for (std::size_t c = 0; c < m.k; ++c) {
        pe += (static_cast<double>(m.row_sum(c)) / total) * (static_cast<double>(m.col_sum(c)) / total);
    }
    if (degenerate) *degenerate = false;
    if (pe >= 1.0 - 1e-12) {
        if (degenerate) *degenerate = true;
        return po >= 1.0 - 1e-12 ? 1.0 : 0.0;
    }
    return (po - pe) / (1.0 - pe);
}

EvaluationReport per_class_metrics(const ConfusionMatrix& m) {
    if (m.total() == 0) throw DataError("per_class_metrics on an empty confusion matrix");
    EvaluationReport r;
    r.confusion = m;
    const std::size_t k = m.k;
    r.precision.assign(k, 0.0);
    r.recall.assign(k, 0.0);
    r.f1.assign(k, 0.0);
    r.support.assign(k, 0);
    r.precision_zero_den.assign(k, false);
    r.recall_zero_den.assign(k, false);
    std::size_t supported = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::uint64_t tp = m.at(c, c);
        const std::uint64_t col = m.col_sum(c);
        const std::uint64_t row = m.row_sum(c);
        r.support[c] = row;
        if (col == 0) {
            r.precision_zero_den[c] = true;
        } else {
            r.precision[c] = static_cast<double>(tp) / static_cast<double>(col);
        }
        if (row == 0) {
            r.recall_zero_den[c] = true;
        } else {
            r.recall[c] = static_cast<double>(tp) / static_cast<double>(row);
        }
        const double pr = r.precision[c] + r.recall[c];
        r.f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
        if (row > 0) {
            ++supported;
            r.macro_precision += r.precision[c];
            r.macro_recall += r.recall[c];
            r.macro_f1 += r.f1[c];
        }
    }
    if (supported > 0) {
        r.macro_precision /= static_cast<double>(supported);
        r.macro_recall /= static_cast<double>(supported);
        r.macro_f1 /= static_cast<double>(supported);
    }
    r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(m.total());
    r.kappa = cohens_kappa(m, &r.kappa_degenerate);
    return r;
}

json report_to_json(const EvaluationReport& r) {
    json confusion = json::array();
    for (std::size_t t = 0; t < r.confusion.k; ++t) {
        json row = json::array();
        for (std::size_t p = 0; p < r.confusion.k; ++p) row.push_back(r.confusion.at(t, p));
        confusion.push_back(std::move(row));
    }
    json per_class;
    per_class["precision"] = r.precision;
    per_class["recall"] = r.recall;
    per_class["f1"] = r.f1;
    per_class["support"] = r.support;
    per_class["precision_zero_den"] = std::vector<int>(r.precision_zero_den.begin(), r.precision_zero_den.end());
    per_class["recall_zero_den"] = std::vector<int>(r.recall_zero_den.begin(), r.recall_zero_den.end());
    json doc;
    doc["confusion"] = std::move(confusion);
    doc["classes"] = r.confusion.class_names;
    doc["per_class"] = std::move(per_class);
    doc["macro"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
    doc["accuracy"] = r.accuracy;
    doc["kappa"] = r.kappa;
    doc["kappa_degenerate"] = r.kappa_degenerate;
    doc["total"] = r.confusion.total();
    return doc;
}

EvaluationReport report_from_json(const json& doc) {
    EvaluationReport r;
    try {
        const auto& confusion = doc.at("confusion");
        r.confusion.k = confusion.size();
        r.confusion.counts.assign(r.confusion.k * r.confusion.k, 0);
        for (std::size_t t = 0; t < r.confusion.k; ++t) {
            for (std::size_t p = 0; p < r.confusion.k; ++p) {
                r.confusion.at(t, p) = confusion.at(t).at(p).get<std::uint64_t>();
            }
        }
        r.confusion.class_names = doc.at("classes").get<std::vector<std::string>>();
        const auto& pc = doc.at("per_class");
        r.precision = pc.at("precision").get<std::vector<double>>();
        r.recall = pc.at("recall").get<std::vector<double>>();
        r.f1 = pc.at("f1").get<std::vector<double>>();
        r.support = pc.at("support").get<std::vector<std::uint64_t>>();
        for (int v : pc.at("precision_zero_den").get<std::vector<int>>()) r.precision_zero_den.push_back(v != 0);
        for (int v : pc.at("recall_zero_den").get<std::vector<int>>()) r.recall_zero_den.push_back(v != 0);
        r.macro_precision = doc.at("macro").at("precision").get<double>();
        r.macro_recall = doc.at("macro").at("recall").get<double>();
        r.macro_f1 = doc.at("macro").at("f1").get<double>();
        r.accuracy = doc.at("accuracy").get<double>();
        r.kappa = doc.at("kappa").get<double>();
        r.kappa_degenerate = doc.at("kappa_degenerate").get<bool>();
    } catch (const json::exception& e) {
        throw ManifestError(std::string("invalid evaluation report: ") + e.what());
    }
    return r;
}

// Three decimals via printf "%.3f" (nearest, ties resolved by the binary
// representation, i.e. 0.9648 -> 0.965).
std::string render_report_table(const EvaluationReport& r) {
    std::size_t name_w = 7;  // "Average"
    for (const auto& n : r.confusion.class_names) name_w = std::max(name_w, n.size());
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_w), "Class", "Precision",
                  "Recall", "F1", "Support");
    out += buf;
    for (std::size_t c = 0; c < r.confusion.k; ++c) {
        std::snprintf(buf, sizeof(buf), "%-*s  %9.3f  %9.3f  %9.3f  %9" PRIu64 "\n", static_cast<int>(name_w),
                      r.confusion.class_names[c].c_str(), r.precision[c], r.recall[c], r.f1[c],
                      static_cast<std::uint64_t>(r.support[c]));
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-*s  %9.3f  %9.3f  %9.3f  %9" PRIu64 "\n", static_cast<int>(name_w), "Average",
                  r.macro_precision, r.macro_recall, r.macro_f1, r.confusion.total());
    out += buf;
    std::snprintf(buf, sizeof(buf), "accuracy %.3f  kappa %.3f%s\n", r.accuracy, r.kappa,
                  r.kappa_degenerate ? " (degenerate)" : "");
    out += buf;
    return out;
}

}  // namespace cacnet
