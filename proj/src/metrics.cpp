#include "cdae/metrics.hpp"

#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cdae {

ConfusionMatrix::ConfusionMatrix(std::int64_t num_classes) : k(num_classes) {
    if (num_classes <= 0) throw std::invalid_argument("confusion matrix needs K >= 1");
    counts.assign(static_cast<std::size_t>(k * k), 0);
}

std::int64_t& ConfusionMatrix::at(std::int64_t truth, std::int64_t pred) {
    return counts[static_cast<std::size_t>(truth * k + pred)];
}

std::int64_t ConfusionMatrix::at(std::int64_t truth, std::int64_t pred) const {
    return counts[static_cast<std::size_t>(truth * k + pred)];
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (std::int64_t i = 0; i < k; ++i) t += at(i, i);
    return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k != k) {
        throw std::invalid_argument("cannot merge confusion matrices of different K");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void confusion_update(ConfusionMatrix& cm, const std::vector<int>& predicted,
                      const std::vector<int>& true_labels) {
    if (predicted.size() != true_labels.size()) {
        throw std::invalid_argument("prediction/label count mismatch");
    }
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const int p = predicted[i];
        const int t = true_labels[i];
        if (p < 0 || p >= cm.k || t < 0 || t >= cm.k) {
            throw std::invalid_argument("label outside [0," + std::to_string(cm.k) +
                                        ") at sample " + std::to_string(i));
        }
        ++cm.at(t, p);
    }
}

double accuracy(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

std::vector<ClassPRF> per_class_prf(const ConfusionMatrix& cm) {
    std::vector<ClassPRF> out(static_cast<std::size_t>(cm.k));
    for (std::int64_t c = 0; c < cm.k; ++c) {
        std::int64_t colsum = 0, rowsum = 0;
        for (std::int64_t j = 0; j < cm.k; ++j) {
            colsum += cm.at(j, c);
            rowsum += cm.at(c, j);
        }
        const double tp = static_cast<double>(cm.at(c, c));
        const double p = colsum > 0 ? tp / static_cast<double>(colsum) : 0.0;
        const double r = rowsum > 0 ? tp / static_cast<double>(rowsum) : 0.0;
        const double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        out[static_cast<std::size_t>(c)] = {p, r, f1};
    }
    return out;
}

double macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::invalid_argument("macro_f1 of an empty confusion matrix");
    const auto prf = per_class_prf(cm);
    double s = 0.0;
    for (const auto& c : prf) s += c.f1;
    return s / static_cast<double>(cm.k);
}

MetricsReport report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names) {
    if (static_cast<std::int64_t>(class_names.size()) != cm.k) {
        throw std::invalid_argument("report needs " + std::to_string(cm.k) + " class names, got " +
                                    std::to_string(class_names.size()));
    }
    MetricsReport r;
    r.matrix = cm;
    r.class_names = class_names;
    r.accuracy_value = accuracy(cm);
    r.macro_f1_value = macro_f1(cm);
    r.per_class = per_class_prf(cm);
    return r;
}

std::string to_text(const MetricsReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "accuracy " << r.accuracy_value << "\n";
    os << "macro_f1 " << r.macro_f1_value << "\n";
    os << "classes " << r.matrix.k << "\n";
    os << "class_names";
    for (const auto& n : r.class_names) os << " " << n;
    os << "\n";
    for (std::int64_t c = 0; c < r.matrix.k; ++c) {
        const auto& prf = r.per_class[static_cast<std::size_t>(c)];
        os << "per_class " << c << " " << prf.precision << " " << prf.recall << " " << prf.f1
           << "\n";
    }
    os << "matrix\n";
    for (std::int64_t t = 0; t < r.matrix.k; ++t) {
        for (std::int64_t p = 0; p < r.matrix.k; ++p) {
            if (p) os << " ";
            os << r.matrix.at(t, p);
        }
        os << "\n";
    }
    return os.str();
}

MetricsReport parse_report(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::int64_t k = -1;
    std::vector<std::string> names;
    std::vector<std::int64_t> counts;
    bool in_matrix = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (in_matrix) {
            std::int64_t v;
            while (ls >> v) counts.push_back(v);
            continue;
        }
        std::string key;
        ls >> key;
        if (key == "classes") {
            ls >> k;
        } else if (key == "class_names") {
            std::string n;
            while (ls >> n) names.push_back(n);
        } else if (key == "matrix") {
            in_matrix = true;
        }
        // accuracy / macro_f1 / per_class lines are display-only; the
        // counts are the source of truth and the metrics are recomputed.
    }
    if (k <= 0 || static_cast<std::int64_t>(names.size()) != k ||
        static_cast<std::int64_t>(counts.size()) != k * k) {
        throw std::invalid_argument("malformed metrics report");
    }
    ConfusionMatrix cm(k);
    cm.counts = counts;
    return report(cm, names);
}

}  // namespace cdae
