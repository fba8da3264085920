#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cdae {

// K x K counts, row = true class, column = predicted class.
struct ConfusionMatrix {
    std::int64_t k = 0;
    std::vector<std::int64_t> counts;  // row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::int64_t num_classes);

    std::int64_t& at(std::int64_t truth, std::int64_t pred);
    std::int64_t at(std::int64_t truth, std::int64_t pred) const;
    std::int64_t total() const;
    std::int64_t trace() const;

    // Matrices are mergeable: merging equals evaluating the concatenated
    // sample sets.
    void merge(const ConfusionMatrix& other);

    bool operator==(const ConfusionMatrix& other) const = default;
};

void confusion_update(ConfusionMatrix& cm, const std::vector<int>& predicted,
                      const std::vector<int>& true_labels);

double accuracy(const ConfusionMatrix& cm);

struct ClassPRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// precision_k = cm[k][k]/colsum_k, recall_k = cm[k][k]/rowsum_k,
// f1 = 2pr/(p+r); any zero denominator makes the affected quantity 0.
std::vector<ClassPRF> per_class_prf(const ConfusionMatrix& cm);

// Unweighted mean of per-class F1 over all K classes, absent ones included.
double macro_f1(const ConfusionMatrix& cm);

struct MetricsReport {
    ConfusionMatrix matrix;
    std::vector<std::string> class_names;
    double accuracy_value = 0.0;
    double macro_f1_value = 0.0;
    std::vector<ClassPRF> per_class;
};

MetricsReport report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names);

// Key-value metrics plus the count matrix; counts survive a round trip
// exactly and the derived metrics are recomputed from them on parse.
std::string to_text(const MetricsReport& r);
MetricsReport parse_report(const std::string& text);

}  // namespace cdae
