#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cdae/metrics.hpp"

using namespace cdae;

namespace {

// The published 7-class skin-lesion confusion matrix (rows true, cols pred).
ConfusionMatrix isic_matrix() {
    ConfusionMatrix cm(7);
    const std::int64_t rows[7][7] = {
        {258, 58, 3, 4, 11, 0, 1},  {32, 1987, 7, 0, 11, 2, 0}, {0, 2, 135, 2, 0, 0, 0},
        {1, 0, 9, 68, 9, 0, 0},     {23, 27, 7, 6, 261, 0, 0},  {1, 6, 2, 2, 3, 25, 0},
        {0, 4, 0, 0, 0, 1, 37},
    };
    for (int t = 0; t < 7; ++t)
        for (int p = 0; p < 7; ++p) cm.at(t, p) = rows[t][p];
    return cm;
}

// The published 5-class retinopathy confusion matrix.
ConfusionMatrix aptos_matrix() {
    ConfusionMatrix cm(5);
    const std::int64_t rows[5][5] = {
        {516, 4, 0, 0, 0}, {8, 82, 35, 0, 1}, {1, 12, 274, 14, 5}, {0, 0, 25, 30, 6},
        {0, 3, 26, 9, 48},
    };
    for (int t = 0; t < 5; ++t)
        for (int p = 0; p < 5; ++p) cm.at(t, p) = rows[t][p];
    return cm;
}

const std::vector<std::string> kIsicNames = {"MEL", "NV", "BCC", "AK", "BKL", "DF", "VASC"};
const std::vector<std::string> kAptosNames = {"NoDR", "Mild", "Moderate", "Severe", "Proliferative"};

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("the skin-lesion matrix reproduces its published headline numbers") {
    const auto cm = isic_matrix();
    CHECK(cm.total() == 3005);
    CHECK(cm.trace() == 2771);
    CHECK(accuracy(cm) == doctest::Approx(2771.0 / 3005.0).epsilon(1e-15));
    // 0.9221 at 4 decimal places
    CHECK(std::round(accuracy(cm) * 1e4) / 1e4 == doctest::Approx(0.9221));
    CHECK(std::abs(macro_f1(cm) - 0.8530) <= 0.0005);
}

TEST_CASE("the retinopathy matrix reproduces its published headline numbers") {
    const auto cm = aptos_matrix();
    CHECK(cm.total() == 1099);
    CHECK(cm.trace() == 950);
    CHECK(accuracy(cm) == doctest::Approx(950.0 / 1099.0).epsilon(1e-15));
    CHECK(std::round(accuracy(cm) * 1e4) / 1e4 == doctest::Approx(0.8644));
    CHECK(std::abs(macro_f1(cm) - 0.7433) <= 0.0005);
}

TEST_CASE("retinopathy class 0 precision, recall and f1") {
    const auto prf = per_class_prf(aptos_matrix());
    CHECK(prf[0].precision == doctest::Approx(516.0 / 525.0).epsilon(1e-15));
    CHECK(prf[0].recall == doctest::Approx(516.0 / 520.0).epsilon(1e-15));
    CHECK(prf[0].f1 == doctest::Approx(0.98755980861244019).epsilon(1e-12));
}

TEST_CASE("single update increments the matching cell") {
    ConfusionMatrix cm(4);
    confusion_update(cm, {2}, {2});
    CHECK(cm.at(2, 2) == 1);
    CHECK(cm.total() == 1);
}

TEST_CASE("batched update equals per-sample updates") {
    const std::vector<int> pred = {0, 1, 2, 1, 0, 2, 2};
    const std::vector<int> truth = {0, 2, 2, 1, 1, 2, 0};
    ConfusionMatrix batched(3);
    confusion_update(batched, pred, truth);
    ConfusionMatrix stepwise(3);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        confusion_update(stepwise, {pred[i]}, {truth[i]});
    }
    CHECK(batched == stepwise);
}

TEST_CASE("merging two matrices equals evaluating the concatenated set") {
    const std::vector<int> pred1 = {0, 1, 1}, truth1 = {0, 1, 0};
    const std::vector<int> pred2 = {2, 2, 0}, truth2 = {2, 1, 0};
    ConfusionMatrix a(3), b(3), joint(3);
    confusion_update(a, pred1, truth1);
    confusion_update(b, pred2, truth2);
    a.merge(b);
    auto pred = pred1;
    pred.insert(pred.end(), pred2.begin(), pred2.end());
    auto truth = truth1;
    truth.insert(truth.end(), truth2.begin(), truth2.end());
    confusion_update(joint, pred, truth);
    CHECK(a == joint);
}

TEST_CASE("rejects out-of-range labels and empty matrices") {
    ConfusionMatrix cm(3);
    CHECK_THROWS_AS(confusion_update(cm, {3}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(confusion_update(cm, {0}, {-1}), std::invalid_argument);
    CHECK_THROWS_AS(accuracy(cm), std::invalid_argument);
    CHECK_THROWS_AS(macro_f1(cm), std::invalid_argument);
}

TEST_CASE("a perfect predictor scores one everywhere") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 5;
    cm.at(1, 1) = 2;
    cm.at(2, 2) = 9;
    CHECK(accuracy(cm) == 1.0);
    CHECK(macro_f1(cm) == 1.0);
    for (const auto& prf : per_class_prf(cm)) {
        CHECK(prf.precision == 1.0);
        CHECK(prf.recall == 1.0);
        CHECK(prf.f1 == 1.0);
    }
}

TEST_CASE("a constant predictor fills a single column") {
    ConfusionMatrix cm(3);
    confusion_update(cm, {0, 0, 0, 0}, {0, 1, 2, 2});
    for (std::int64_t t = 0; t < 3; ++t) {
        CHECK(cm.at(t, 1) == 0);
        CHECK(cm.at(t, 2) == 0);
    }
    CHECK(cm.at(0, 0) == 1);
}

TEST_CASE("absent classes contribute zero under the zero-division policy") {
    ConfusionMatrix cm(3);
    cm.at(0, 0) = 4;
    cm.at(1, 0) = 1;  // class 2 never present, never predicted
    const auto prf = per_class_prf(cm);
    CHECK(prf[2].precision == 0.0);
    CHECK(prf[2].recall == 0.0);
    CHECK(prf[2].f1 == 0.0);
    // macro average still runs over all K classes
    CHECK(macro_f1(cm) == doctest::Approx((prf[0].f1 + prf[1].f1 + 0.0) / 3.0).epsilon(1e-15));
}

TEST_CASE("a symmetric two-class matrix shares one f1 value") {
    ConfusionMatrix cm(2);
    cm.at(0, 0) = 7;
    cm.at(0, 1) = 3;
    cm.at(1, 0) = 3;
    cm.at(1, 1) = 7;
    const auto prf = per_class_prf(cm);
    CHECK(prf[0].f1 == prf[1].f1);
}

TEST_CASE("macro f1 is invariant under simultaneous row/column permutation") {
    const auto cm = aptos_matrix();
    // relabel classes by the permutation sigma(i) = (i + 2) mod 5
    ConfusionMatrix permuted(5);
    for (std::int64_t t = 0; t < 5; ++t) {
        for (std::int64_t p = 0; p < 5; ++p) {
            permuted.at((t + 2) % 5, (p + 2) % 5) = cm.at(t, p);
        }
    }
    CHECK(macro_f1(permuted) == doctest::Approx(macro_f1(cm)).epsilon(1e-15));
    CHECK(accuracy(permuted) == doctest::Approx(accuracy(cm)).epsilon(1e-15));
}

TEST_CASE("metrics stay in [0,1] even when macro f1 exceeds accuracy") {
    const auto cm = isic_matrix();
    CHECK(accuracy(cm) >= 0.0);
    CHECK(accuracy(cm) <= 1.0);
    CHECK(macro_f1(cm) >= 0.0);
    CHECK(macro_f1(cm) <= 1.0);
}

TEST_CASE("report round-trips every count exactly") {
    const auto r = report(isic_matrix(), kIsicNames);
    const auto parsed = parse_report(to_text(r));
    CHECK(parsed.matrix == r.matrix);
    CHECK(parsed.class_names == r.class_names);
    CHECK(parsed.accuracy_value == r.accuracy_value);
    CHECK(parsed.macro_f1_value == r.macro_f1_value);
}

TEST_CASE("report of the skin-lesion matrix prints the headline accuracy at 4 decimals") {
    const auto text = to_text(report(isic_matrix(), kIsicNames));
    CHECK(text.find("accuracy 0.9221") != std::string::npos);
    CHECK(text.find("macro_f1 0.8530") != std::string::npos);
}

TEST_CASE("report accuracy equals accuracy of the matrix") {
    const auto cm = aptos_matrix();
    const auto r = report(cm, kAptosNames);
    CHECK(r.accuracy_value == accuracy(cm));
    CHECK(r.macro_f1_value == macro_f1(cm));
}

TEST_CASE("report rejects a name count mismatch") {
    CHECK_THROWS_AS(report(aptos_matrix(), kIsicNames), std::invalid_argument);
}

}  // TEST_SUITE
