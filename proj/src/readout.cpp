#include "rydberg/readout.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace rydberg::readout {

namespace {

std::int64_t poisson(double mean, Rng& rng) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<std::int64_t>(mean)(rng);
}

bool bernoulli(double p, Rng& rng) {
    if (p <= 0.0) return false;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

void require_mean(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + ": must be finite and >= 0");
}

void require_prob(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + ": must lie in [0, 1]");
}

std::size_t index(TrueState s) { return static_cast<std::size_t>(s); }

}  // namespace

std::string_view to_string(TrueState s) {
    switch (s) {
        case TrueState::Zero: return "zero";
        case TrueState::One: return "one";
        case TrueState::Lost: return "lost";
    }
    return "?";
}

std::string_view to_string(OutcomeClass c) {
    switch (c) {
        case OutcomeClass::Zero: return "zero";
        case OutcomeClass::One: return "one";
        case OutcomeClass::Loss: return "loss";
    }
    return "?";
}

void ImagingParams::validate() const {
    require_mean(lambda_bright1, "lambda_bright1");
    require_mean(lambda_dark1, "lambda_dark1");
    require_mean(lambda_present2, "lambda_present2");
    require_mean(lambda_bg2, "lambda_bg2");
    require_prob(depump_prob, "depump_prob");
    require_prob(loss_prob_stage1, "loss_prob_stage1");
    if (!std::isfinite(pgc_detuning_offset)) throw std::invalid_argument("pgc_detuning_offset: must be finite");
}

void Thresholds::validate() const {
    if (t1 < 0) throw std::invalid_argument("t1: must be >= 0");
    if (t2 < 0) throw std::invalid_argument("t2: must be >= 0");
}

Counts simulate_counts(TrueState s, const ImagingParams& p, Rng& rng) {
    Counts out;
    if (s == TrueState::One) {
        double mean = p.lambda_bright1;
        if (bernoulli(p.depump_prob, rng)) mean *= std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        out.c1 = poisson(mean, rng);
    } else {
        out.c1 = poisson(p.lambda_dark1, rng);
    }
    out.survived = s != TrueState::Lost && !bernoulli(p.loss_prob_stage1, rng);
    out.c2 = poisson(out.survived ? p.lambda_present2 : p.lambda_bg2, rng);
    return out;
}

Outcome classify(std::int64_t c1, std::int64_t c2, const Thresholds& th) {
    if (c1 > th.t1) return {OutcomeClass::One, c1, c2};
    if (c2 > th.t2) return {OutcomeClass::Zero, c1, c2};
    return {OutcomeClass::Loss, c1, c2};
}

std::size_t misclassifications(std::span<const LabeledCounts> labeled, const Thresholds& th) {
    std::size_t wrong = 0;
    for (const auto& s : labeled) {
        const auto c = classify(s.c1, s.c2, th).cls;
        wrong += static_cast<std::size_t>(c) != index(s.state);
    }
    return wrong;
}

Thresholds calibrate_thresholds(std::span<const LabeledCounts> labeled, std::size_t min_per_class) {
    std::array<std::size_t, 3> per_class{};
    std::int64_t m1 = 0, m2 = 0;
    for (const auto& s : labeled) {
        if (s.c1 < 0 || s.c2 < 0) throw std::invalid_argument("calibrate_thresholds: negative count");
        ++per_class[index(s.state)];
        m1 = std::max(m1, s.c1);
        m2 = std::max(m2, s.c2);
    }
    for (std::size_t k = 0; k < 3; ++k)
        if (per_class[k] < min_per_class)
            throw std::invalid_argument("calibrate_thresholds: class '" +
                                        std::string(to_string(static_cast<TrueState>(k))) + "' has " +
                                        std::to_string(per_class[k]) + " samples, need " +
                                        std::to_string(min_per_class));

    // cum[k][a][b] = #samples of class k with c1 <= a and c2 <= b.
    const auto w1 = static_cast<std::size_t>(m1) + 1, w2 = static_cast<std::size_t>(m2) + 1;
    std::array<std::vector<std::size_t>, 3> cum;
    for (auto& c : cum) c.assign(w1 * w2, 0);
    for (const auto& s : labeled)
        ++cum[index(s.state)][static_cast<std::size_t>(s.c1) * w2 + static_cast<std::size_t>(s.c2)];
    for (auto& c : cum) {
        for (std::size_t a = 0; a < w1; ++a)
            for (std::size_t b = 1; b < w2; ++b) c[a * w2 + b] += c[a * w2 + b - 1];
        for (std::size_t a = 1; a < w1; ++a)
            for (std::size_t b = 0; b < w2; ++b) c[a * w2 + b] += c[(a - 1) * w2 + b];
    }

    const std::size_t zero = index(TrueState::Zero), one = index(TrueState::One), lost = index(TrueState::Lost);
    std::size_t best_correct = 0;
    Thresholds best{};
    bool first = true;
    for (std::size_t a = 0; a < w1; ++a) {
        const std::size_t ones = per_class[one] - cum[one][a * w2 + w2 - 1];
        const std::size_t zeros_low = cum[zero][a * w2 + w2 - 1];
        for (std::size_t b = 0; b < w2; ++b) {
            const std::size_t correct = ones + (zeros_low - cum[zero][a * w2 + b]) + cum[lost][a * w2 + b];
            if (first || correct >= best_correct) {
                best_correct = correct;
                best = {static_cast<int>(a), static_cast<int>(b)};
                first = false;
            }
        }
    }
    return best;
}

std::vector<LabeledCounts> draw_labeled(const ImagingParams& p, std::size_t per_class, Rng& rng) {
    p.validate();
    std::vector<LabeledCounts> out;
    out.reserve(3 * per_class);
    for (TrueState s : {TrueState::Zero, TrueState::One, TrueState::Lost})
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto c = simulate_counts(s, p, rng);
            out.push_back({s, c.c1, c.c2});
        }
    return out;
}

Confusion confusion_matrix(const ImagingParams& p, const Thresholds& th, std::size_t n_samples, Rng& rng) {
    if (n_samples < 1000) throw std::invalid_argument("confusion_matrix: n_samples must be >= 1000");
    p.validate();
    th.validate();
    Confusion m{};
    for (TrueState s : {TrueState::Zero, TrueState::One, TrueState::Lost}) {
        std::array<std::size_t, 3> hits{};
        for (std::size_t i = 0; i < n_samples; ++i) {
            const auto c = simulate_counts(s, p, rng);
            ++hits[static_cast<std::size_t>(classify(c.c1, c.c2, th).cls)];
        }
        for (std::size_t k = 0; k < 3; ++k)
            m[index(s)][k] = static_cast<double>(hits[k]) / static_cast<double>(n_samples);
    }
    return m;
}

ReadoutFigures evaluate(const ImagingParams& p, const Thresholds& th, std::size_t per_class, Rng& rng) {
    if (per_class == 0) throw std::invalid_argument("evaluate: per_class must be > 0");
    p.validate();
    th.validate();
    std::size_t correct = 0, present = 0;
    for (TrueState s : {TrueState::Zero, TrueState::One})
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto c = simulate_counts(s, p, rng);
            correct += static_cast<std::size_t>(classify(c.c1, c.c2, th).cls) == index(s);
            present += c.c2 > th.t2;
        }
    const auto n = static_cast<double>(2 * per_class);
    return {static_cast<double>(correct) / n, static_cast<double>(present) / n};
}

}  // namespace rydberg::readout
