#pragma once

// Global echoed randomized benchmarking of the CZ gate, erasure
// post-selection, and the multi-round refresh driver.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rydberg/czgate.hpp"
#include "rydberg/motional.hpp"
#include "rydberg/readout.hpp"

namespace rydberg::bench {

using qdyn::Complex;
using qdyn::Rng;
using Mat2 = std::array<std::array<Complex, 2>, 2>;
using Mat4 = czgate::Matrix4;

// U = Rz(axis_phase) Rx(polar) Rz(z_phase), Rz(a) = diag(e^{-ia/2}, e^{ia/2}).
struct GlobalRotation {
    double axis_phase = 0.0;
    double polar = 0.0;
    double z_phase = 0.0;

    Mat2 matrix() const;
};

// Euler angles of u up to a global phase.
GlobalRotation to_rotation(const Mat2& u);

GlobalRotation sample_haar_rotation(Rng& rng);

struct RBSequence {
    int n_cz = 0;
    std::vector<GlobalRotation> rotations;  // one per CZ pair
    std::vector<int> echo_flags;            // CZ indices followed by the global X
    GlobalRotation r_f;
};

// [R_rand, CZ, X, CZ] x n_cz/2, then R_f. Throws std::invalid_argument for
// odd or negative n_cz.
RBSequence build_sequence(int n_cz, Rng& rng);

// Noise-free return probability to |00> computed by explicit 4x4 products.
double ideal_return_probability(const RBSequence& seq);

Mat2 mul(const Mat2& a, const Mat2& b);
Mat2 adjoint(const Mat2& a);
Mat4 mul(const Mat4& a, const Mat4& b);
Mat4 kron(const Mat2& a, const Mat2& b);
Mat4 cz_matrix();

struct NoiseModel {
    double doppler_sigma = 0.0;      // rad/s, per atom
    bool doppler_per_gate = false;   // resample the detuning for every CZ
    double loss_prob_gate = 0.0;     // per atom per CZ
    double recycle_prob_gate = 0.0;  // per atom per CZ
    double scatter_prob_gate = 0.0;  // per atom per CZ
    double prep_error = 0.0;         // per atom
    double single_qubit_error = 0.0; // depolarizing per rotation per atom
    double depolarizing_prob_gate = 0.0;  // two-qubit depolarizing per CZ

    void validate() const;
};

enum class FitMode { Raw, Corrected };  // asymptote 0 / asymptote 1/4

std::string_view to_string(FitMode m);
double asymptote(FitMode m);

struct DecayPoint {
    double n = 0.0;
    double y = 0.0;
    double std_err = 0.0;
};

struct FitResult {
    double p = 0.0;
    double amplitude = 0.0;
    double std_err = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Weighted least squares of y = a p^n + asymptote over (a, p), weights
// 1/std_err^2, p kept in [0, 1]. Throws std::invalid_argument for fewer than
// three points or non-positive std_err.
FitResult fit_decay(std::span<const DecayPoint> points, FitMode mode, double initial_amplitude);

// Raw: F = p. Corrected: F = 1 - (3/4)(1 - p).
double fidelity_from_decay(double p, FitMode mode);

struct ShotRecord {
    int round = 0;
    int n_cz = 0;
    int randomization = 0;
    int shot = 0;
    std::array<readout::OutcomeClass, 2> cls{};
    std::array<std::int64_t, 2> c1{};
    std::array<std::int64_t, 2> c2{};

    bool any_loss() const;
    bool returned() const;  // both atoms read as Zero
};

std::vector<ShotRecord> post_select_loss(std::span<const ShotRecord> shots);

struct RBPoint {
    int n_cz = 0;
    double return_prob = 0.0;  // raw, over all shots
    double std_err = 0.0;
    std::size_t n_shots = 0;
    std::size_t n_kept = 0;
    double return_prob_kept = 0.0;  // among shots with no Loss outcome
    double std_err_kept = 0.0;
};

struct RBResult {
    std::vector<RBPoint> points;
    FitResult fit_raw;
    FitResult fit_corrected;
    double p_raw = 0.0;
    double p_corrected = 0.0;
    double f_raw = 0.0;
    double f_corrected = 0.0;
    std::vector<ShotRecord> shots;  // filled when RBConfig::record_shots
};

// Imaging used at the end of every shot; absent means the true state is
// reported directly.
struct ReadoutModel {
    readout::ImagingParams imaging;
    readout::Thresholds thresholds;
};

struct RBConfig {
    std::vector<int> n_cz_list{2, 20, 40, 80, 120, 160};
    int randomizations = 32;
    int shots = 100;  // per randomization
    std::uint64_t seed = 1;
    int round = 0;    // mixed into the shot streams
    int workers = 1;
    bool record_shots = false;
    bool ideal_gate = false;  // use the exact CZ instead of the pulse simulation
    czgate::SimulationOptions sim{50.0, false};

    void validate() const;
};

// Binomial standard error with add-one smoothing, so that 0 and 1 keep a
// finite weight.
double binomial_std_err(std::size_t successes, std::size_t trials);

// Shot stream seed derived from the master seed and the shot coordinates.
std::uint64_t shot_seed(std::uint64_t seed, int round, int point, int randomization, int shot);

RBResult run_rb(const RBConfig& cfg, const czgate::BlockadeModel& model, const czgate::PulseProfile& profile,
                const NoiseModel& noise, const std::optional<ReadoutModel>& readout);

enum class PolicyKind { NoCooling, LocalGM, RSC };

std::string_view to_string(PolicyKind k);

// One block of cooling cycles alternating over the modes; per_mode[i]
// cools mode i.
struct RscStage {
    std::vector<motional::RscConfig> per_mode;
    int cycles = 0;  // total over all modes
};

struct RoundPolicy {
    PolicyKind kind = PolicyKind::RSC;
    double gm_floor = 4.0;  // LocalGM nbar floor
    std::vector<RscStage> rsc_stages;
};

struct StageSpec {
    double pulse_area;   // eta Omega_c t
    int cycles_per_mode;
};

// Coarse-to-fine pulse areas: short pulses first so that hot distributions
// stay clear of red-sideband dark states, ending on the default area.
inline constexpr std::array<StageSpec, 3> kDefaultRscStages{
    {{0.2, 300}, {0.45, 40}, {motional::kDefaultRscPulseArea, 27}}};

std::vector<RscStage> default_rsc_stages(std::span<const motional::MotionalMode> modes);

struct MotionConfig {
    std::vector<motional::MotionalMode> modes;  // initial state, radial first
    std::vector<double> direction_cosines;      // projection of k_eff on each mode
    double k_eff = 0.0;                         // rad/m
    double atom_mass = motional::kRb87Mass;
};

struct RoundResult {
    int round = 0;  // 1-based
    double f_corrected = 0.0;
    double f_raw = 0.0;
    double corrected_std_err = 0.0;
    std::vector<double> nbar;  // per mode, as seen by the gates of this round
    double doppler_sigma = 0.0;
    RBResult rb;
};

// Adds `phonons` quanta to the mode: the distribution is convolved with a
// Poisson distribution of that mean.
motional::MotionalMode heat_mode(const motional::MotionalMode& mode, double phonons);

// Round 1 runs on the initial motional state. Each later round first adds
// heating_per_round phonons to every mode, then applies the policy, then
// benchmarks with the Doppler width of the resulting state.
std::vector<RoundResult> run_rounds(int n_rounds, const RoundPolicy& policy, double heating_per_round,
                                    const MotionConfig& motion, const RBConfig& rb, const czgate::BlockadeModel& model,
                                    const czgate::PulseProfile& profile, const NoiseModel& noise,
                                    const std::optional<ReadoutModel>& readout);

}  // namespace rydberg::bench
