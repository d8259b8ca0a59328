#pragma once

#include <string>
#include <vector>

#include "cacnet/fsio.hpp"

// Evaluation surface: confusion matrix, per-class precision/recall/F1,
// macro averages over supported classes, accuracy, and Cohen's kappa.

namespace cacnet {

struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::uint64_t> counts;  // row-major, rows = true, cols = predicted
    std::vector<std::string> class_names;

    std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(std::size_t r) const;
    std::uint64_t col_sum(std::size_t c) const;
};

struct EvaluationReport {
    ConfusionMatrix confusion;
    std::vector<double> precision, recall, f1;
    std::vector<std::uint64_t> support;
    // true where a zero denominator forced the metric to 0
    std::vector<bool> precision_zero_den, recall_zero_den;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double accuracy = 0.0;
    double kappa = 0.0;
    bool kappa_degenerate = false;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truths, const std::vector<int>& preds, std::size_t k,
                                 std::vector<std::string> class_names = {});

EvaluationReport per_class_metrics(const ConfusionMatrix& m);

// kappa = (p_o - p_e) / (1 - p_e); if p_e == 1 the result is 1 when p_o == 1
// and 0 otherwise, with the degenerate flag set.
double cohens_kappa(const ConfusionMatrix& m, bool* degenerate = nullptr);

json report_to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const json& doc);

// Aligned per-class table plus an Average row, three decimals.
std::string render_report_table(const EvaluationReport& r);

}  // namespace cacnet
