#include "rydberg/motional.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace rydberg::motional {

namespace {

constexpr double kTailTolerance = 1e-9;

double rabi_transfer(double rabi, double detuning, double time) {
    if (rabi == 0.0) return 0.0;
    const double w2 = rabi * rabi + detuning * detuning;
    const double s = std::sin(0.5 * std::sqrt(w2) * time);
    return rabi * rabi / w2 * s * s;
}

void check_dist(std::span<const double> dist) {
    if (dist.empty()) throw std::invalid_argument("dist: must not be empty");
    double sum = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("dist: entries must be finite and >= 0");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("dist: entries must sum to 1 (got " + std::to_string(sum) + ")");
}

std::vector<double> normalized(std::vector<double> v) {
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& p : v) p /= sum;
    return v;
}

}  // namespace

std::string_view to_string(ModeLabel label) { return label == ModeLabel::Radial ? "radial" : "axial"; }

MotionalMode::MotionalMode(double trap_freq, double lamb_dicke, std::vector<double> dist, ModeLabel label)
    : trap_freq_(trap_freq), lamb_dicke_(lamb_dicke), dist_(std::move(dist)), label_(label) {
    if (!(trap_freq > 0.0) || !std::isfinite(trap_freq)) throw std::invalid_argument("trap_freq: must be > 0");
    if (!(lamb_dicke > 0.0 && lamb_dicke < 0.5))
        throw std::invalid_argument("lamb_dicke: must lie in (0, 0.5)");
    check_dist(dist_);
}

double MotionalMode::nbar() const {
    double m = 0.0;
    for (std::size_t n = 0; n < dist_.size(); ++n) m += static_cast<double>(n) * dist_[n];
    return m;
}

MotionalMode MotionalMode::with_dist(std::vector<double> dist) const {
    return MotionalMode(trap_freq_, lamb_dicke_, std::move(dist), label_);
}

void RscConfig::validate() const {
    if (!(carrier_rabi > 0.0)) throw std::invalid_argument("carrier_rabi: must be > 0");
    if (!(pulse_time > 0.0)) throw std::invalid_argument("pulse_time: must be > 0");
    if (!(pump_heating >= 0.0 && pump_heating <= 1.0))
        throw std::invalid_argument("pump_heating: must lie in [0, 1]");
    if (cycles < 0) throw std::invalid_argument("cycles: must be >= 0");
}

RscConfig default_rsc_config(double lamb_dicke) {
    if (!(lamb_dicke > 0.0)) throw std::invalid_argument("lamb_dicke: must be > 0");
    RscConfig cfg;
    cfg.carrier_rabi = kDefaultRscCarrierRabi;
    cfg.pulse_time = kDefaultRscPulseArea / (lamb_dicke * kDefaultRscCarrierRabi);
    cfg.pump_heating = kDefaultPumpHeating;
    cfg.cycles = kDefaultRscCycles;
    return cfg;
}

std::vector<double> thermal_distribution(double nbar, std::size_t n_max) {
    if (!(nbar >= 0.0) || !std::isfinite(nbar)) throw std::invalid_argument("nbar: must be finite and >= 0");
    std::vector<double> p(n_max + 1, 0.0);
    if (nbar == 0.0) {
        p[0] = 1.0;
        return p;
    }
    const double q = nbar / (1.0 + nbar);
    const double tail = std::pow(q, static_cast<double>(n_max + 1));
    if (tail > kTailTolerance)
        throw std::invalid_argument("n_max too small: thermal tail " + std::to_string(tail) + " exceeds 1e-9");
    double term = 1.0 / (1.0 + nbar);
    for (std::size_t n = 0; n <= n_max; ++n) {
        p[n] = term;
        term *= q;
    }
    return normalized(std::move(p));
}

std::size_t thermal_cutoff(double nbar) {
    if (nbar <= 0.0) return 8;
    const double q = nbar / (1.0 + nbar);
    const auto n = static_cast<std::size_t>(std::ceil(std::log(kTailTolerance) / std::log(q)));
    return std::max<std::size_t>(8, n);
}

MotionalMode thermal_mode(double trap_freq, double lamb_dicke, double nbar, ModeLabel label) {
    return MotionalMode(trap_freq, lamb_dicke, thermal_distribution(nbar, thermal_cutoff(nbar)), label);
}

double sideband_rabi(long n, int delta_n, const MotionalMode& mode, double carrier_rabi) {
    if (n < 0 || n + delta_n < 0) return 0.0;
    const double eta = mode.lamb_dicke();
    const auto nn = static_cast<double>(n);
    switch (delta_n) {
        case 0: return carrier_rabi * (1.0 - eta * eta * nn);
        case -1: return eta * carrier_rabi * std::sqrt(nn);
        case 1: return eta * carrier_rabi * std::sqrt(nn + 1.0);
        default: throw std::invalid_argument("sideband_rabi: delta_n must be -1, 0 or +1");
    }
}

MotionalMode rsc_cycle(const MotionalMode& mode, const RscConfig& cfg) {
    cfg.validate();
    const auto dist = mode.dist();
    const std::size_t size = dist.size();

    std::vector<double> cooled(size, 0.0);
    cooled[0] = dist[0];
    for (std::size_t n = 1; n < size; ++n) {
        const double s = std::sin(0.5 * sideband_rabi(static_cast<long>(n), -1, mode, cfg.carrier_rabi) * cfg.pulse_time);
        const double moved = dist[n] * s * s;
        cooled[n - 1] += moved;
        cooled[n] += dist[n] - moved;
    }

    const double h = cfg.pump_heating;
    const bool grow = h > 0.0 && cooled.back() > 0.0;
    std::vector<double> out(grow ? size + 1 : size, 0.0);
    for (std::size_t n = 0; n < size; ++n) {
        out[n] += cooled[n] * (1.0 - h);
        if (n + 1 < out.size()) out[n + 1] += cooled[n] * h;
        else out[n] += cooled[n] * h;
    }
    return mode.with_dist(normalized(std::move(out)));
}

std::vector<MotionalMode> rsc_schedule(std::vector<MotionalMode> modes, std::span<const RscConfig> per_mode,
                                       int cycles) {
    if (per_mode.size() != modes.size())
        throw std::invalid_argument("rsc_schedule: one RscConfig per mode required");
    if (modes.empty()) return modes;
    for (int i = 0; i < cycles; ++i) {
        const auto k = static_cast<std::size_t>(i) % modes.size();
        modes[k] = rsc_cycle(modes[k], per_mode[k]);
    }
    return modes;
}

SidebandSpectrum sideband_spectrum(std::span<const MotionalMode> modes, double probe_rabi,
                                   double probe_time, std::span<const double> detunings) {
    if (modes.empty()) throw std::invalid_argument("sideband_spectrum: no modes");
    double max_trap = 0.0;
    for (const auto& m : modes) max_trap = std::max(max_trap, m.trap_freq());
    const auto [lo, hi] = std::minmax_element(detunings.begin(), detunings.end());
    if (detunings.empty() || *lo > -1.5 * max_trap || *hi < 1.5 * max_trap)
        throw std::invalid_argument("sideband_spectrum: detuning grid must cover +-1.5 max trap frequency");

    // Carrier: joint Debye-Waller factor across modes, weights pruned below 1e-14.
    std::vector<std::pair<double, double>> carrier{{probe_rabi, 1.0}};
    for (const auto& m : modes) {
        std::vector<std::pair<double, double>> next;
        const double eta2 = m.lamb_dicke() * m.lamb_dicke();
        for (const auto& [rabi, w] : carrier)
            for (std::size_t n = 0; n < m.dist().size(); ++n) {
                const double weight = w * m.dist()[n];
                if (weight < 1e-14) continue;
                next.emplace_back(rabi * (1.0 - eta2 * static_cast<double>(n)), weight);
            }
        carrier = std::move(next);
    }

    // Sidebands: (line centre, Rabi frequency, weight).
    struct Line {
        double centre, rabi, weight;
    };
    std::vector<Line> lines;
    for (const auto& m : modes) {
        for (std::size_t n = 0; n < m.dist().size(); ++n) {
            const double p = m.dist()[n];
            if (p < 1e-14) continue;
            const auto nl = static_cast<long>(n);
            if (n > 0) lines.push_back({-m.trap_freq(), sideband_rabi(nl, -1, m, probe_rabi), p});
            lines.push_back({m.trap_freq(), sideband_rabi(nl, +1, m, probe_rabi), p});
        }
    }

    SidebandSpectrum spec;
    spec.detunings.assign(detunings.begin(), detunings.end());
    spec.transfer.reserve(detunings.size());
    for (double d : detunings) {
        double t = 0.0;
        for (const auto& [rabi, w] : carrier) t += w * rabi_transfer(rabi, d, probe_time);
        for (const auto& l : lines) t += l.weight * rabi_transfer(l.rabi, d - l.centre, probe_time);
        spec.transfer.push_back(std::clamp(t, 0.0, 1.0));
    }
    return spec;
}

std::vector<double> detuning_grid(std::span<const MotionalMode> modes, double step, double span_factor) {
    if (!(step > 0.0)) throw std::invalid_argument("detuning grid step must be > 0");
    double max_trap = 0.0;
    for (const auto& m : modes) max_trap = std::max(max_trap, m.trap_freq());
    const auto half = static_cast<long>(std::ceil(span_factor * max_trap / step));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(2 * half + 1));
    for (long k = -half; k <= half; ++k) grid.push_back(static_cast<double>(k) * step);
    return grid;
}

Thermometry fit_mean_phonon(const SidebandSpectrum& spec, double trap_freq) {
    double red = -1.0, blue = -1.0;
    for (std::size_t i = 0; i < spec.detunings.size(); ++i) {
        const double d = spec.detunings[i];
        if (std::abs(d + trap_freq) <= 0.15 * trap_freq) red = std::max(red, spec.transfer[i]);
        if (std::abs(d - trap_freq) <= 0.15 * trap_freq) blue = std::max(blue, spec.transfer[i]);
    }
    if (red < 0.0 || blue < 0.0)
        throw std::invalid_argument("fit_mean_phonon: spectrum does not cover both sidebands");
    if (!(blue > 0.0) || red >= blue)
        throw std::domain_error("fit_mean_phonon: red/blue ratio >= 1, spectrum is not thermal");
    const double r = red / blue;
    return {r / (1.0 - r), r};
}

std::vector<double> resolved_peaks(const SidebandSpectrum& spec, double min_height, double min_separation) {
    const auto& y = spec.transfer;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < y.size(); ++i)
        if (y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= min_height) candidates.push_back(i);
    std::stable_sort(candidates.begin(), candidates.end(), [&](auto a, auto b) { return y[a] > y[b]; });
    std::vector<double> kept;
    for (auto i : candidates) {
        const double d = spec.detunings[i];
        const bool far = std::all_of(kept.begin(), kept.end(),
                                     [&](double k) { return std::abs(k - d) >= min_separation; });
        if (far) kept.push_back(d);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

double doppler_sigma(std::span<const MotionalMode> modes, std::span<const double> direction_cosines,
                     double k_eff, double atom_mass) {
    if (modes.empty()) throw std::invalid_argument("doppler_sigma: no modes");
    if (direction_cosines.size() != modes.size())
        throw std::invalid_argument("doppler_sigma: one direction cosine per mode required");
    if (!(atom_mass > 0.0)) throw std::invalid_argument("doppler_sigma: atom_mass must be > 0");
    double var = 0.0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const double c = direction_cosines[i];
        var += c * c * kHbar * modes[i].trap_freq() / (2.0 * atom_mass) * (2.0 * modes[i].nbar() + 1.0);
    }
    return std::abs(k_eff) * std::sqrt(var);
}

double counter_propagating_k(double lambda1, double lambda2) {
    constexpr double kTwoPi = 6.283185307179586;
    return std::abs(kTwoPi / lambda1 - kTwoPi / lambda2);
}

double lamb_dicke_parameter(double k, double trap_freq, double atom_mass) {
    return k * std::sqrt(kHbar / (2.0 * atom_mass * trap_freq));
}

}  // namespace rydberg::motional
