#pragma once

// Harmonic-trap phonon ladders, Raman sideband cooling on the clock
// transition, sideband spectroscopy and peak-ratio thermometry.

#include <span>
#include <string_view>
#include <vector>

namespace rydberg::motional {

inline constexpr double kHbar = 1.054571817e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kRb87Mass = 86.909180527 * kAtomicMassUnit;

enum class ModeLabel { Radial, Axial };

std::string_view to_string(ModeLabel label);

class MotionalMode {
  public:
    // Throws std::invalid_argument unless trap_freq > 0, lamb_dicke in
    // (0, 0.5) and dist is a probability vector (sum 1 within 1e-12).
    MotionalMode(double trap_freq, double lamb_dicke, std::vector<double> dist, ModeLabel label);

    double trap_freq() const { return trap_freq_; }
    double lamb_dicke() const { return lamb_dicke_; }
    ModeLabel label() const { return label_; }
    std::span<const double> dist() const { return dist_; }
    std::size_t n_max() const { return dist_.size() - 1; }
    double nbar() const;

    MotionalMode with_dist(std::vector<double> dist) const;

  private:
    double trap_freq_;
    double lamb_dicke_;
    std::vector<double> dist_;
    ModeLabel label_;
};

struct RscConfig {
    double carrier_rabi = 0.0;  // rad/s
    double pulse_time = 0.0;    // s, per red-sideband pulse
    double pump_heating = 0.0;  // probability of n -> n + 1 per pumping event
    int cycles = 0;             // per mode

    void validate() const;
};

inline constexpr double kDefaultRscCarrierRabi = 2.0 * 3.14159265358979323846 * 10.0e3;
inline constexpr double kDefaultRscPulseArea = 0.84;  // eta * Omega_c * t
inline constexpr double kDefaultPumpHeating = 0.11;
inline constexpr int kDefaultRscCycles = 32;

// Default cooling settings for a mode: the pulse time is chosen so that
// eta Omega_c t equals kDefaultRscPulseArea; the first red-sideband dark
// state then sits at n = (2 pi / 0.84)^2, about 56.
RscConfig default_rsc_config(double lamb_dicke);

struct SidebandSpectrum {
    std::vector<double> detunings;  // rad/s
    std::vector<double> transfer;
};

struct Thermometry {
    double nbar = 0.0;
    double ratio = 0.0;  // red / blue peak
};

// p(n) = nbar^n / (1 + nbar)^(n + 1), renormalized over 0..n_max. Throws
// std::invalid_argument when the discarded tail exceeds 1e-9.
std::vector<double> thermal_distribution(double nbar, std::size_t n_max);

// Smallest n_max whose thermal tail is below 1e-9 (at least 8).
std::size_t thermal_cutoff(double nbar);

MotionalMode thermal_mode(double trap_freq, double lamb_dicke, double nbar, ModeLabel label);

// First-order Lamb-Dicke Rabi frequency of |n> -> |n + delta_n>.
double sideband_rabi(long n, int delta_n, const MotionalMode& mode, double carrier_rabi);

// One cooling cycle: red-sideband pulse (|n> -> |n-1> with probability
// sin^2(Omega_{n,n-1} t / 2)) followed by optical pumping back to the
// clock state, which heats n -> n + 1 with probability pump_heating. The
// distribution grows by one level when heating reaches past n_max.
MotionalMode rsc_cycle(const MotionalMode& mode, const RscConfig& cfg);

// Applies `cycles` cooling cycles, alternating between the modes in order;
// mode i is cooled with per_mode[i].
std::vector<MotionalMode> rsc_schedule(std::vector<MotionalMode> modes, std::span<const RscConfig> per_mode,
                                       int cycles);

SidebandSpectrum sideband_spectrum(std::span<const MotionalMode> modes, double probe_rabi,
                                   double probe_time, std::span<const double> detunings);

// Uniform grid over +-span_factor * max trap frequency with the given step;
// the grid contains 0 and every multiple of `step`.
std::vector<double> detuning_grid(std::span<const MotionalMode> modes, double step,
                                  double span_factor = 1.5);

// Peak-ratio thermometry; throws std::domain_error when red >= blue.
Thermometry fit_mean_phonon(const SidebandSpectrum& spec, double trap_freq);

// Local maxima above min_height, merged when closer than min_separation.
std::vector<double> resolved_peaks(const SidebandSpectrum& spec, double min_height,
                                   double min_separation);

// sigma_delta = k_eff sqrt(sum_m cos_m^2 hbar w_m (2 nbar_m + 1) / (2 mass)).
double doppler_sigma(std::span<const MotionalMode> modes, std::span<const double> direction_cosines,
                     double k_eff, double atom_mass);

// |k_1 - k_2| for counter-propagating beams of the given wavelengths.
double counter_propagating_k(double lambda1, double lambda2);

// eta = k sqrt(hbar / (2 m w)).
double lamb_dicke_parameter(double k, double trap_freq, double atom_mass);

}  // namespace rydberg::motional
