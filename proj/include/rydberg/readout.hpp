#pragma once

// Two-stage fluorescence readout: a state-selective stage that lights up
// |1>, then a state-independent stage that detects presence.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rydberg/qdyn.hpp"

namespace rydberg::readout {

using Rng = qdyn::Rng;

enum class TrueState { Zero, One, Lost };
enum class OutcomeClass { Zero, One, Loss };

std::string_view to_string(TrueState s);
std::string_view to_string(OutcomeClass c);

struct ImagingParams {
    double lambda_bright1 = 45.0;
    double lambda_dark1 = 1.5;
    double lambda_present2 = 40.0;
    double lambda_bg2 = 1.5;
    double depump_prob = 0.115;
    double loss_prob_stage1 = 0.003;
    double pgc_detuning_offset = 0.0;  // rad/s, bookkeeping only

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Thresholds {
    int t1 = 0;
    int t2 = 0;

    void validate() const;
};

struct Counts {
    std::int64_t c1 = 0;
    std::int64_t c2 = 0;
    bool survived = true;  // still trapped during stage 2
};

struct Outcome {
    OutcomeClass cls = OutcomeClass::Loss;
    std::int64_t c1 = 0;
    std::int64_t c2 = 0;
};

struct LabeledCounts {
    TrueState state;
    std::int64_t c1;
    std::int64_t c2;
};

Counts simulate_counts(TrueState s, const ImagingParams& p, Rng& rng);

// c1 > t1 -> One; else c2 > t2 -> Zero; else Loss.
Outcome classify(std::int64_t c1, std::int64_t c2, const Thresholds& th);

// Exhaustive integer scan minimizing misclassifications; ties go to the
// larger t1, then the larger t2. Throws std::invalid_argument unless every
// class has at least min_per_class samples.
Thresholds calibrate_thresholds(std::span<const LabeledCounts> labeled, std::size_t min_per_class = 1000);

std::size_t misclassifications(std::span<const LabeledCounts> labeled, const Thresholds& th);

// Rows = true state (Zero, One, Lost), columns = assigned class (Zero, One, Loss).
using Confusion = std::array<std::array<double, 3>, 3>;
Confusion confusion_matrix(const ImagingParams& p, const Thresholds& th, std::size_t n_samples, Rng& rng);

std::vector<LabeledCounts> draw_labeled(const ImagingParams& p, std::size_t per_class, Rng& rng);

struct ReadoutFigures {
    double state_fidelity = 0.0;  // mean of P(Zero|Zero) and P(One|One)
    double survival = 0.0;        // P(c2 > t2) for atoms present at the start
};

// Evaluated on fresh draws of per_class atoms in each of |0> and |1>.
ReadoutFigures evaluate(const ImagingParams& p, const Thresholds& th, std::size_t per_class, Rng& rng);

}  // namespace rydberg::readout
