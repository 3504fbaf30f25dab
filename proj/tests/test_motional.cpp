#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rydberg/motional.hpp"

using namespace rydberg::motional;

namespace {

constexpr double kTwoPi = 6.283185307179586;
const double kRadial = kTwoPi * 100e3, kAxial = kTwoPi * 20e3;
const double kEtaR = 0.16, kEtaA = 0.16 * std::sqrt(5.0);

double mean(const std::vector<double>& p) {
    double m = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<double>(n) * p[n];
    return m;
}

// Dense Markov matrix of one cooling cycle on levels 0..size-1, applied as
// heating(transfer(p)); written independently of rsc_cycle.
struct MarkovOracle {
    std::vector<std::vector<double>> t;  // t[to][from]

    MarkovOracle(std::size_t size, double eta, const RscConfig& c) : t(size, std::vector<double>(size, 0.0)) {
        std::vector<std::vector<double>> red(size, std::vector<double>(size, 0.0)), heat = red;
        for (std::size_t n = 0; n < size; ++n) {
            const double s = n == 0 ? 0.0 : std::pow(std::sin(eta * c.carrier_rabi * std::sqrt(double(n)) * c.pulse_time / 2), 2);
            red[n][n] += 1.0 - s;
            if (n > 0) red[n - 1][n] += s;
            const double h = n + 1 < size ? c.pump_heating : 0.0;
            heat[n][n] += 1.0 - h;
            if (n + 1 < size) heat[n + 1][n] += h;
        }
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j)
                for (std::size_t k = 0; k < size; ++k) t[i][j] += heat[i][k] * red[k][j];
    }

    std::vector<double> step(const std::vector<double>& p) const {
        std::vector<double> out(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < p.size(); ++j) out[i] += t[i][j] * p[j];
        return out;
    }
};

std::vector<double> padded(std::span<const double> d, std::size_t size) {
    std::vector<double> out(size, 0.0);
    std::copy(d.begin(), d.end(), out.begin());
    return out;
}

SidebandSpectrum spectrum_at(double nbar_r, double nbar_a, double step = kTwoPi * 250.0) {
    std::vector<MotionalMode> m{thermal_mode(kRadial, kEtaR, nbar_r, ModeLabel::Radial),
                                thermal_mode(kAxial, kEtaA, nbar_a, ModeLabel::Axial)};
    return sideband_spectrum(m, kTwoPi * 1e3, 250e-6, detuning_grid(m, step));
}

double transfer_at(const SidebandSpectrum& s, double d) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < s.detunings.size(); ++i)
        if (std::abs(s.detunings[i] - d) < std::abs(s.detunings[best] - d)) best = i;
    return s.transfer[best];
}

}  // namespace

TEST_CASE("thermal distribution") {
    const auto p0 = thermal_distribution(0.0, 10);
    CHECK(p0[0] == 1.0);
    CHECK(std::accumulate(p0.begin() + 1, p0.end(), 0.0) == 0.0);
    const auto p1 = thermal_distribution(1.0, thermal_cutoff(1.0));
    CHECK(p1[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p1[1] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(p1[2] == doctest::Approx(0.125).epsilon(1e-9));
    for (double nbar : {0.1, 1.0, 5.0, 40.0}) {
        const auto p = thermal_distribution(nbar, thermal_cutoff(nbar));
        CHECK(mean(p) == doctest::Approx(nbar).epsilon(1e-6));
    }
    CHECK_THROWS_AS(thermal_distribution(5.0, 10), std::invalid_argument);
}

TEST_CASE("mode invariants are enforced") {
    CHECK_THROWS_AS(MotionalMode(kRadial, 0.6, {1.0}, ModeLabel::Radial), std::invalid_argument);
    CHECK_THROWS_AS(MotionalMode(kRadial, 0.1, {0.5, 0.4}, ModeLabel::Radial), std::invalid_argument);
    CHECK_THROWS_AS(MotionalMode(-1.0, 0.1, {1.0}, ModeLabel::Radial), std::invalid_argument);
    CHECK_THROWS_AS(MotionalMode(kRadial, 0.1, {1.2, -0.2}, ModeLabel::Radial), std::invalid_argument);
}

TEST_CASE("sideband Rabi frequencies") {
    const auto m = thermal_mode(kRadial, 0.1, 0.0, ModeLabel::Radial);
    const double oc = kTwoPi * 10e3;
    CHECK(sideband_rabi(0, -1, m, oc) == 0.0);
    CHECK(sideband_rabi(4, -1, m, oc) == doctest::Approx(2 * 0.1 * oc));
    CHECK(sideband_rabi(0, +1, m, oc) == doctest::Approx(0.1 * oc));
    CHECK(sideband_rabi(3, 0, m, oc) == doctest::Approx(oc * (1 - 0.01 * 3)));
}

TEST_CASE("ground state is dark to cooling without heating") {
    const auto m = MotionalMode(kRadial, kEtaR, {1.0, 0.0, 0.0}, ModeLabel::Radial);
    auto cfg = default_rsc_config(kEtaR);
    cfg.pump_heating = 0.0;
    const auto out = rsc_cycle(m, cfg);
    CHECK(out.dist()[0] == 1.0);
    CHECK(out.nbar() == 0.0);
}

TEST_CASE("a sideband pi pulse empties n = 1 in one cycle") {
    const auto m = MotionalMode(kRadial, kEtaR, {0.0, 1.0}, ModeLabel::Radial);
    const double oc = kTwoPi * 10e3;
    const RscConfig cfg{oc, 3.14159265358979323846 / (kEtaR * oc), 0.0, 1};
    const auto out = rsc_cycle(m, cfg);
    CHECK(std::abs(out.dist()[0] - 1.0) < 1e-10);
}

TEST_CASE("default cooling from nbar 5 matches the Markov oracle") {
    const auto cfg = default_rsc_config(kEtaR);
    auto mode = thermal_mode(kRadial, kEtaR, 5.0, ModeLabel::Radial);
    const std::size_t size = mode.dist().size() + 31;
    const MarkovOracle oracle(size, kEtaR, cfg);
    auto p = padded(mode.dist(), size);
    for (int c = 0; c < 30; ++c) {
        mode = rsc_cycle(mode, cfg);
        p = oracle.step(p);
    }
    const auto got = padded(mode.dist(), size);
    double worst = 0.0;
    for (std::size_t n = 0; n < size; ++n) worst = std::max(worst, std::abs(got[n] - p[n]));
    CHECK(worst <= 1e-10);
    CHECK(mode.nbar() <= 1.0);
    CHECK(mode.nbar() == doctest::Approx(0.865).epsilon(0.01));
}

TEST_CASE("cooling preserves normalization and never heats without pumping") {
    std::vector<double> d(40);
    for (std::size_t n = 0; n < d.size(); ++n) d[n] = 1.0 + std::sin(double(n) * 1.3);
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    for (auto& x : d) x /= s;
    auto mode = MotionalMode(kAxial, kEtaA, d, ModeLabel::Axial);
    auto cfg = default_rsc_config(kEtaA);
    cfg.pump_heating = 0.0;
    for (int c = 0; c < 50; ++c) {
        const auto next = rsc_cycle(mode, cfg);
        CHECK(next.nbar() <= mode.nbar() + 1e-12);
        const auto dist = next.dist();
        CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(*std::min_element(dist.begin(), dist.end()) >= 0.0);
        mode = next;
    }
}

TEST_CASE("steady-state floor rises with pump heating") {
    double prev = -1.0;
    for (double h : {0.02, 0.11, 0.25}) {
        auto cfg = default_rsc_config(kEtaR);
        cfg.pump_heating = h;
        auto mode = thermal_mode(kRadial, kEtaR, 0.0, ModeLabel::Radial);
        const int cycles = 200;
        const std::size_t size = mode.dist().size() + cycles + 1;
        const MarkovOracle oracle(size, kEtaR, cfg);
        auto p = padded(mode.dist(), size);
        for (int c = 0; c < cycles; ++c) {
            mode = rsc_cycle(mode, cfg);
            p = oracle.step(p);
        }
        CHECK(mode.nbar() == doctest::Approx(mean(p)).epsilon(1e-10));
        CHECK(mode.nbar() > prev);
        prev = mode.nbar();
    }
}

TEST_CASE("schedule alternates modes with per-mode settings") {
    std::vector<MotionalMode> modes{thermal_mode(kRadial, kEtaR, 3.0, ModeLabel::Radial),
                                    thermal_mode(kAxial, kEtaA, 3.0, ModeLabel::Axial)};
    const std::vector<RscConfig> cfgs{default_rsc_config(kEtaR), default_rsc_config(kEtaA)};
    const auto out = rsc_schedule(modes, cfgs, 5);
    auto r = modes[0], a = modes[1];
    for (int i = 0; i < 3; ++i) r = rsc_cycle(r, cfgs[0]);
    for (int i = 0; i < 2; ++i) a = rsc_cycle(a, cfgs[1]);
    CHECK(out[0].nbar() == doctest::Approx(r.nbar()).epsilon(1e-14));
    CHECK(out[1].nbar() == doctest::Approx(a.nbar()).epsilon(1e-14));
    CHECK_THROWS_AS(rsc_schedule(modes, std::span(cfgs).first(1), 4), std::invalid_argument);
    CHECK(default_rsc_config(kEtaR).pulse_time * kEtaR * kDefaultRscCarrierRabi ==
          doctest::Approx(kDefaultRscPulseArea));
}

TEST_CASE("ground-state spectrum has no red sidebands") {
    const auto s = spectrum_at(0.0, 0.0);
    const double omega = kTwoPi * 1e3;
    for (double w : {kRadial, kAxial}) {
        const double carrier_tail = omega * omega / (omega * omega + w * w);
        CHECK(transfer_at(s, -w) <= 1e-6 + carrier_tail);
        CHECK(transfer_at(s, -w) / transfer_at(s, w) < 1e-3 + carrier_tail / transfer_at(s, w));
    }
    for (double t : s.transfer) {
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}

TEST_CASE("nbar = 1 spectrum shows five resolved features with red below blue") {
    const auto s = spectrum_at(1.0, 1.0);
    const auto peaks = resolved_peaks(s, 0.005, 0.5 * kAxial);
    REQUIRE(peaks.size() == 5);
    const double expect[] = {-kRadial, -kAxial, 0.0, kAxial, kRadial};
    for (int i = 0; i < 5; ++i) CHECK(std::abs(peaks[i] - expect[i]) <= kTwoPi * 500.0);
    for (double nbar : {0.3, 1.0, 3.0}) {
        const auto sp = spectrum_at(nbar, nbar);
        CHECK(transfer_at(sp, -kRadial) < transfer_at(sp, kRadial));
        CHECK(transfer_at(sp, -kAxial) < transfer_at(sp, kAxial));
    }
}

TEST_CASE("peak-ratio thermometry") {
    SidebandSpectrum synthetic{{-kAxial, 0.0, kAxial}, {0.0, 0.9, 0.2}};
    CHECK(fit_mean_phonon(synthetic, kAxial).nbar == 0.0);
    synthetic.transfer[0] = 0.1;
    CHECK(fit_mean_phonon(synthetic, kAxial).nbar == doctest::Approx(1.0));
    synthetic.transfer[0] = 0.2;
    CHECK_THROWS_AS(fit_mean_phonon(synthetic, kAxial), std::domain_error);
    for (double nbar : {0.3, 1.0, 3.0}) {
        const auto s = spectrum_at(nbar, nbar);
        for (double w : {kRadial, kAxial}) {
            const double fit = fit_mean_phonon(s, w).nbar;
            CHECK(std::abs(fit - nbar) <= 0.15 * nbar);
        }
    }
}

TEST_CASE("Doppler width from the motional state") {
    const double k = counter_propagating_k(420e-9, 1013e-9);
    CHECK(k == doctest::Approx(kTwoPi / 420e-9 - kTwoPi / 1013e-9));
    std::vector<MotionalMode> cold{thermal_mode(kRadial, kEtaR, 0.0, ModeLabel::Radial),
                                   thermal_mode(kAxial, kEtaA, 0.0, ModeLabel::Axial)};
    const std::vector<double> cosines{0.8, 0.6};
    const double zp = 0.64 * kHbar * kRadial / (2 * kRb87Mass) + 0.36 * kHbar * kAxial / (2 * kRb87Mass);
    CHECK(doppler_sigma(cold, cosines, k, kRb87Mass) == doctest::Approx(k * std::sqrt(zp)).epsilon(1e-12));

    // classical limit: nbar + 1/2 = kT / (hbar w) gives sigma_v = sqrt(kT / m), about 2.76 cm/s at 8 uK
    const double temp = 8e-6;
    const double nbar = kBoltzmann * temp / (kHbar * kRadial) - 0.5;
    std::vector<MotionalMode> hot{MotionalMode(kRadial, kEtaR, thermal_distribution(nbar, thermal_cutoff(nbar)),
                                               ModeLabel::Radial)};
    const std::vector<double> one{1.0};
    const double sigma_v = std::sqrt(kBoltzmann * temp / kRb87Mass);
    CHECK(sigma_v == doctest::Approx(0.0276).epsilon(0.01));
    CHECK(doppler_sigma(hot, one, k, kRb87Mass) == doctest::Approx(k * sigma_v).epsilon(1e-6));

    // doubling nbar + 1/2 scales the width by sqrt 2
    std::vector<MotionalMode> a{thermal_mode(kRadial, kEtaR, 1.0, ModeLabel::Radial)};
    std::vector<MotionalMode> b{thermal_mode(kRadial, kEtaR, 2.5, ModeLabel::Radial)};
    CHECK(doppler_sigma(b, one, k, kRb87Mass) / doppler_sigma(a, one, k, kRb87Mass) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-7));
    CHECK(lamb_dicke_parameter(k, kRadial, kRb87Mass) == doctest::Approx(k * std::sqrt(kHbar / (2 * kRb87Mass * kRadial))));
}
