#pragma once

// Two-atom Rydberg-blockade CZ gate driven by a constant-amplitude,
// sinusoidally phase-modulated pulse.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rydberg/qdyn.hpp"

namespace rydberg::czgate {

using qdyn::Complex;
using qdyn::OperatorMatrix;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct BlockadeModel {
    double omega = kTwoPi * 5.0e6;          // two-photon Rabi frequency, rad/s
    double delta_int = kTwoPi * 9.1e9;      // intermediate-state detuning, rad/s
    double blockade_v = std::numeric_limits<double>::infinity();  // rad/s
    double gamma_rydberg = 0.0;             // total Rydberg decay rate, 1/s
    double bbr_fraction = 0.0;              // loss-producing share of Rydberg decay
    double gamma_intermediate = 0.0;        // intermediate-state linewidth, 1/s
    std::string rydberg_label = "70S1/2";

    bool perfect_blockade() const { return !std::isfinite(blockade_v); }
    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct PulseProfile {
    double amp = 0.0;              // rad
    double mod_freq_cycles = 0.0;  // sine cycles across the pulse
    double phase0 = 0.0;           // rad
    double detuning_slope = 0.0;   // rad/s
    double duration = 0.0;         // s
    double local_phase = 0.0;      // rad, single-qubit Z correction after the gate

    void validate() const;
};

// Time-optimal profile found by optimize_pulse for the default 5 MHz model.
PulseProfile default_profile(const BlockadeModel& model = {});

// phi(t) = amp sin(2 pi m t / T + phase0) + slope t; throws std::out_of_range
// outside [0, T].
double phase_at(double t, const PulseProfile& p);

// Symmetric two-atom basis used by build_hamiltonian.
enum SymmetricBasis : std::size_t { k00, k01, k10, k11, k0r, kr0, kW, krr };

// H in {|00>,|01>,|10>,|11>,|0r>,|r0>,|W>} (perfect blockade) or with |rr>
// appended at energy V. |W> = (|1r> + |r1>)/sqrt2.
OperatorMatrix build_hamiltonian(const BlockadeModel& model, double phi);

// Per-atom perturbations of one shot: static detuning of the Rydberg level
// (Doppler) and relative Rabi amplitude (beam inhomogeneity).
struct AtomPerturbation {
    std::array<double, 2> detuning{0.0, 0.0};  // rad/s, atoms A and B
    std::array<double, 2> omega_scale{1.0, 1.0};

    bool symmetric() const { return detuning[0] == detuning[1] && omega_scale[0] == omega_scale[1]; }
};

// Product basis of two three-level atoms {0, 1, r}: index 3 a + b.
inline constexpr std::size_t kProductDim = 9;
inline constexpr std::size_t product_index(std::size_t a, std::size_t b) { return 3 * a + b; }
inline constexpr std::array<std::size_t, 4> kComputationalRows{0, 1, 3, 4};

// Full product-basis Hamiltonian with per-atom perturbations. The |rr>
// coupling is dropped under perfect blockade.
OperatorMatrix build_product_hamiltonian(const BlockadeModel& model, double phi,
                                         const AtomPerturbation& pert);

struct GateResult {
    // rows/cols ordered |00>,|01>,|10>,|11>; local-phase corrected
    std::array<std::array<Complex, 4>, 4> unitary_on_comp{};
    std::array<double, 4> leakage{};
    double fidelity = 0.0;
    // Final states of the four computational inputs in the product basis
    // (column c = input c), local-phase corrected.
    std::array<std::array<Complex, kProductDim>, 4> propagator{};
    // Time-integrated number of Rydberg-excited atoms for each input, s.
    std::array<double, 4> rydberg_time{};
};

struct SimulationOptions {
    double steps_per_period = 100.0;  // RK4 steps per 2 pi / Omega_max
    bool track_rydberg_time = true;
};

GateResult simulate_gate(const PulseProfile& p, const BlockadeModel& model,
                         const std::optional<AtomPerturbation>& pert = std::nullopt,
                         const SimulationOptions& opts = {});

using Matrix4 = std::array<std::array<Complex, 4>, 4>;

struct FidelityDetail {
    double fidelity = 0.0;
    double theta = 0.0;  // local phase of the best-matching CZ(theta)
};

// Average gate fidelity of u against CZ(theta) = diag(1, e^{i th}, e^{i th}, -e^{2 i th}):
// (Tr(M M^dag) + |Tr M|^2) / 20 with M = CZ(theta)^dag u. With
// maximize_local_phase theta is optimized, otherwise theta = 0.
FidelityDetail gate_fidelity_detail(const Matrix4& u, bool maximize_local_phase);
double gate_fidelity(const Matrix4& u, bool maximize_local_phase);

struct OptimizeLogEntry {
    std::size_t evaluation;
    double objective;
    double best_objective;
};

struct OptimizeResult {
    PulseProfile profile;
    double fidelity = 0.0;
    std::size_t evaluations = 0;
    std::optional<std::size_t> evaluations_to_target;
    bool converged = false;  // best fidelity >= 0.999
    std::vector<OptimizeLogEntry> log;
};

struct OptimizeOptions {
    std::size_t budget = 2000;
    double target_fidelity = 0.9999;
    SimulationOptions sim{};
};

// Nelder-Mead over (amp, cycles, phase0, slope/Omega, Omega T) minimizing
// 1 - F with the local phase maximized analytically. Decay rates are
// ignored; the result carries the optimal local_phase.
OptimizeResult optimize_pulse(const BlockadeModel& model, const PulseProfile& initial,
                              const OptimizeOptions& opts = {});

// Resonant single-atom |1> <-> |r> flopping, returns (duration, P_r) pairs.
std::vector<std::pair<double, double>> rabi_scan(const BlockadeModel& model,
                                                 const std::vector<double>& durations);

struct DecayEstimate {
    double loss_prob = 0.0;     // per atom per gate, Rydberg decay out of the trap
    double recycle_prob = 0.0;  // per atom per gate, decay back to the ground manifold
    double scatter_prob = 0.0;  // per atom per gate, intermediate-state scattering
};

// Per-atom error probabilities implied by the model's decay rates for one
// gate, averaged over the four computational inputs. Scattering assumes
// equal single-photon Rabi frequencies, so each atom in |1> or |r> holds
// an intermediate-state population Omega / (2 |Delta|).
DecayEstimate estimate_decay(const GateResult& gate, const PulseProfile& p,
                             const BlockadeModel& model);

}  // namespace rydberg::czgate
