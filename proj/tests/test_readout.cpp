#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "rydberg/readout.hpp"

using namespace rydberg::readout;

namespace {

ImagingParams noiseless() {
    ImagingParams p;
    p.lambda_bright1 = 200.0;
    p.lambda_dark1 = 0.0;
    p.lambda_present2 = 200.0;
    p.lambda_bg2 = 0.0;
    p.depump_prob = 0.0;
    p.loss_prob_stage1 = 0.0;
    return p;
}

double mean_of(TrueState s, const ImagingParams& p, bool stage2, int n, Rng& rng) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto c = simulate_counts(s, p, rng);
        sum += static_cast<double>(stage2 ? c.c2 : c.c1);
    }
    return sum / n;
}

}  // namespace

TEST_CASE("classification rules") {
    const Thresholds th{6, 16};
    CHECK(classify(7, 0, th).cls == OutcomeClass::One);
    CHECK(classify(7, 100, th).cls == OutcomeClass::One);
    CHECK(classify(0, 17, th).cls == OutcomeClass::Zero);
    CHECK(classify(0, 0, th).cls == OutcomeClass::Loss);
    CHECK(classify(6, 16, th).cls == OutcomeClass::Loss);
    const auto o = classify(3, 20, th);
    CHECK(o.c1 == 3);
    CHECK(o.c2 == 20);
}

TEST_CASE("count statistics match the Poisson means") {
    Rng rng(1);
    const ImagingParams def;
    const int n = 10000;
    const double bg = mean_of(TrueState::Lost, def, true, n, rng);
    CHECK(std::abs(bg - def.lambda_bg2) < 3 * std::sqrt(def.lambda_bg2 / n));
    ImagingParams clean = def;
    clean.depump_prob = 0.0;
    clean.loss_prob_stage1 = 0.0;
    const double bright = mean_of(TrueState::One, clean, false, n, rng);
    CHECK(std::abs(bright - clean.lambda_bright1) < 3 * std::sqrt(clean.lambda_bright1 / n));
    const double dark = mean_of(TrueState::Zero, clean, false, n, rng);
    CHECK(std::abs(dark - clean.lambda_dark1) < 3 * std::sqrt(clean.lambda_dark1 / n));
}

TEST_CASE("depumping pulls the bright mean down by half the depump rate") {
    Rng rng(2);
    ImagingParams p;
    p.depump_prob = 0.5;
    p.loss_prob_stage1 = 0.0;
    const int n = 20000;
    const double m = mean_of(TrueState::One, p, false, n, rng);
    // E[c1] = lambda (1 - d / 2) for a uniform truncation
    CHECK(m == doctest::Approx(p.lambda_bright1 * 0.75).epsilon(0.02));
}

TEST_CASE("default clusters have the expected topology") {
    Rng rng(3);
    const ImagingParams p;
    const Thresholds th{6, 16};
    const auto labeled = draw_labeled(p, 2000, rng);
    double c1[3] = {}, c2[3] = {}, count[3] = {};
    for (const auto& l : labeled) {
        const auto k = static_cast<int>(l.state);
        c1[k] += l.c1, c2[k] += l.c2, count[k] += 1;
    }
    for (int k = 0; k < 3; ++k) c1[k] /= count[k], c2[k] /= count[k];
    const int zero = 0, one = 1, lost = 2;
    CHECK(c1[one] > th.t1);           // right
    CHECK(c1[zero] < th.t1);          // left
    CHECK(c2[zero] > th.t2);          // upper
    CHECK(c1[lost] < th.t1);
    CHECK(c2[lost] < th.t2);          // lower left
}

TEST_CASE("threshold calibration") {
    Rng rng(4);
    const auto separated = draw_labeled(noiseless(), 1000, rng);
    const auto th = calibrate_thresholds(separated);
    CHECK(misclassifications(separated, th) == 0);

    const ImagingParams def;
    const auto labeled = draw_labeled(def, 3000, rng);
    const auto best = calibrate_thresholds(labeled);
    const auto best_err = misclassifications(labeled, best);
    for (int t1 = 0; t1 < 30; t1 += 3)
        for (int t2 = 0; t2 < 40; t2 += 4) CHECK(best_err <= misclassifications(labeled, Thresholds{t1, t2}));

    std::vector<LabeledCounts> missing;
    for (const auto& l : labeled)
        if (l.state != TrueState::Lost) missing.push_back(l);
    CHECK_THROWS_AS(calibrate_thresholds(missing), std::invalid_argument);
}

TEST_CASE("calibration breaks ties toward larger thresholds") {
    std::vector<LabeledCounts> data;
    for (int i = 0; i < 1000; ++i) {
        data.push_back({TrueState::One, 50, 50});
        data.push_back({TrueState::Zero, 0, 50});
        data.push_back({TrueState::Lost, 0, 0});
    }
    const auto th = calibrate_thresholds(data);
    CHECK(th.t1 == 49);
    CHECK(th.t2 == 49);
}

TEST_CASE("confusion matrices") {
    Rng rng(5);
    const auto ideal = confusion_matrix(noiseless(), Thresholds{50, 50}, 2000, rng);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(ideal[r][c] == (r == c ? 1.0 : 0.0));

    const ImagingParams def;
    const auto m = confusion_matrix(def, Thresholds{6, 16}, 10000, rng);
    for (const auto& row : m) CHECK(row[0] + row[1] + row[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((m[0][0] + m[1][1] + m[2][2]) / 3.0 >= 0.985);
    CHECK_THROWS(confusion_matrix(def, Thresholds{6, 16}, 999, rng));

    // swapping bright and dark stage-1 means swaps which state lights up
    ImagingParams swapped = noiseless();
    swapped.lambda_bright1 = 0.0;
    swapped.lambda_dark1 = 200.0;
    const auto s = confusion_matrix(swapped, Thresholds{50, 50}, 2000, rng);
    CHECK(s[0][1] == 1.0);
    CHECK(s[1][0] == 1.0);
}

TEST_CASE("brighter stage 1 never hurts the One diagonal") {
    double prev = -1.0;
    for (double lb : {20.0, 30.0, 45.0, 60.0, 80.0}) {
        Rng rng(6);
        ImagingParams p;
        p.lambda_bright1 = lb;
        const double one = confusion_matrix(p, Thresholds{6, 16}, 20000, rng)[1][1];
        CHECK(one >= prev - 0.003);
        prev = one;
    }
}

TEST_CASE("validation") {
    ImagingParams p;
    p.depump_prob = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = ImagingParams{};
    p.lambda_bg2 = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS((Thresholds{-1, 3}.validate()), std::invalid_argument);
}
