#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "rydberg/bench.hpp"

using namespace rydberg;
using namespace rydberg::bench;

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat2 pauli(int k) {
    const Complex i(0.0, 1.0);
    switch (k) {
        case 1: return Mat2{{{0.0, 1.0}, {1.0, 0.0}}};
        case 2: return Mat2{{{0.0, -i}, {i, 0.0}}};
        case 3: return Mat2{{{1.0, 0.0}, {0.0, -1.0}}};
        default: return Mat2{{{1.0, 0.0}, {0.0, 1.0}}};
    }
}

RBConfig small_config() {
    RBConfig c;
    c.n_cz_list = {2, 20, 60, 120};
    c.randomizations = 8;
    c.shots = 50;
    c.seed = 77;
    return c;
}

std::vector<DecayPoint> model_points(double a, double p, double asym, std::vector<int> ns) {
    std::vector<DecayPoint> out;
    for (int n : ns) out.push_back({double(n), a * std::pow(p, n) + asym, 0.01});
    return out;
}

}  // namespace

TEST_CASE("CZ (X x X) CZ equals Y x Y") {
    // with CZ = diag(1, 1, 1, -1) the sign is +; -(Y x Y) only up to a global phase
    const auto lhs = mul(mul(cz_matrix(), kron(pauli(1), pauli(1))), cz_matrix());
    const auto yy = kron(pauli(2), pauli(2));
    Complex overlap = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(lhs[i][j] == yy[i][j]);
            overlap += std::conj(-yy[i][j]) * lhs[i][j];
        }
    CHECK(std::abs(overlap) == 4.0);
}

TEST_CASE("rotation matrices and Euler extraction") {
    const auto x = GlobalRotation{0.0, kPi, 0.0}.matrix();
    CHECK(std::abs(std::abs(x[0][1]) - 1.0) < 1e-15);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto r = sample_haar_rotation(rng);
        const auto u = r.matrix();
        const auto det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
        CHECK(std::abs(std::abs(det) - 1.0) < 1e-12);
        const auto back = to_rotation(u).matrix();
        // equal up to a global phase
        const Complex overlap = back[0][0] * std::conj(u[0][0]) + back[0][1] * std::conj(u[0][1]) +
                                back[1][0] * std::conj(u[1][0]) + back[1][1] * std::conj(u[1][1]);
        CHECK(std::abs(overlap) == doctest::Approx(2.0).epsilon(1e-10));
    }
}

TEST_CASE("Haar moments of the sampled rotations") {
    std::mt19937_64 rng(11);
    double m2 = 0.0, m4 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double a = std::norm(sample_haar_rotation(rng).matrix()[0][0]);
        m2 += a, m4 += a * a;
    }
    CHECK(std::abs(m2 / n - 0.5) <= 0.005);
    CHECK(std::abs(m4 / n - 1.0 / 3.0) <= 0.01);
}

TEST_CASE("rotation streams are seed-determined") {
    std::mt19937_64 a(5), b(5), c(6);
    const auto ra = sample_haar_rotation(a), rb = sample_haar_rotation(b), rc = sample_haar_rotation(c);
    CHECK(ra.axis_phase == rb.axis_phase);
    CHECK(ra.polar == rb.polar);
    CHECK(ra.z_phase == rb.z_phase);
    CHECK(ra.axis_phase != rc.axis_phase);
}

TEST_CASE("sequence construction") {
    std::mt19937_64 rng(1);
    const auto empty = build_sequence(0, rng);
    CHECK(empty.rotations.empty());
    const auto id = empty.r_f.matrix();
    CHECK(std::abs(std::abs(id[0][0]) - 1.0) < 1e-12);
    CHECK(std::abs(id[0][1]) < 1e-12);
    CHECK_THROWS_AS(build_sequence(3, rng), std::invalid_argument);
    CHECK_THROWS_AS(build_sequence(-2, rng), std::invalid_argument);

    for (int n = 2; n <= 20; n += 2)
        for (int k = 0; k < 10; ++k) {
            const auto seq = build_sequence(n, rng);
            CHECK(seq.rotations.size() == std::size_t(n / 2));
            CHECK(ideal_return_probability(seq) == doctest::Approx(1.0).epsilon(1e-10));
        }
}

TEST_CASE("two CZs with an identity rotation return through a global X") {
    RBSequence seq;
    seq.n_cz = 2;
    seq.rotations = {GlobalRotation{}};
    seq.echo_flags = {0};
    seq.r_f = GlobalRotation{0.0, kPi, 0.0};
    CHECK(ideal_return_probability(seq) == doctest::Approx(1.0).epsilon(1e-12));
    seq.r_f = GlobalRotation{};
    CHECK(ideal_return_probability(seq) < 1e-12);
}

TEST_CASE("decay fits") {
    const auto exact = model_points(0.75, 0.99, 0.25, {2, 20, 40, 80, 120, 160});
    const auto f = fit_decay(exact, FitMode::Corrected, 0.7);
    CHECK(f.converged);
    CHECK(std::abs(f.p - 0.99) <= 1e-9);
    const auto flat = model_points(1.0, 1.0, 0.0, {2, 20, 40});
    CHECK(fit_decay(flat, FitMode::Raw, 1.0).p == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(fit_decay(std::span(exact).first(2), FitMode::Raw, 1.0), std::invalid_argument);
    auto bad = exact;
    bad[1].std_err = 0.0;
    CHECK_THROWS_AS(fit_decay(bad, FitMode::Raw, 1.0), std::invalid_argument);
}

TEST_CASE("fitted p does not depend on the overall weight scale") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 0.01);
    auto pts = model_points(0.9, 0.995, 0.0, {2, 20, 40, 80, 120, 160});
    for (auto& p : pts) p.y += g(rng), p.std_err = 0.01 + 0.002 * p.n / 160;
    auto scaled = pts;
    for (auto& p : scaled) p.std_err *= 7.3;
    const auto a = fit_decay(pts, FitMode::Raw, 1.0), b = fit_decay(scaled, FitMode::Raw, 1.0);
    CHECK(a.p == doctest::Approx(b.p).epsilon(1e-10));
}

TEST_CASE("fit standard errors cover the truth") {
    std::mt19937_64 rng(12);
    const std::vector<int> ns{2, 20, 40, 80, 120, 160};
    const int shots = 2000, reps = 200;
    int covered = 0;
    for (int r = 0; r < reps; ++r) {
        std::vector<DecayPoint> pts;
        for (int n : ns) {
            const double prob = 0.75 * std::pow(0.996, n) + 0.25;
            const auto k = std::binomial_distribution<int>(shots, prob)(rng);
            pts.push_back({double(n), double(k) / shots, binomial_std_err(std::size_t(k), shots)});
        }
        const auto f = fit_decay(pts, FitMode::Corrected, 0.75);
        if (std::abs(f.p - 0.996) <= 3 * f.std_err) ++covered;
    }
    CHECK(covered >= 190);
}

TEST_CASE("decay to fidelity conversion") {
    CHECK(fidelity_from_decay(1.0, FitMode::Raw) == 1.0);
    CHECK(fidelity_from_decay(1.0, FitMode::Corrected) == 1.0);
    CHECK(fidelity_from_decay(0.99747, FitMode::Corrected) == doctest::Approx(1.0 - 0.75 * (1.0 - 0.99747)).epsilon(1e-12));
    CHECK(fidelity_from_decay(0.9960, FitMode::Raw) == 0.9960);
    CHECK(asymptote(FitMode::Raw) == 0.0);
    CHECK(asymptote(FitMode::Corrected) == 0.25);
}

TEST_CASE("loss post-selection") {
    std::vector<ShotRecord> shots(10);
    for (int i = 0; i < 10; ++i) {
        shots[i].shot = i;
        shots[i].c1 = {i, 2 * i};
        shots[i].cls = {readout::OutcomeClass::Zero, readout::OutcomeClass::One};
    }
    const auto same = post_select_loss(shots);
    REQUIRE(same.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(same[i].shot == i);
        CHECK(same[i].c1 == shots[i].c1);
        CHECK(same[i].cls == shots[i].cls);
    }
    for (int i = 0; i < 10; i += 2) shots[i].cls[0] = readout::OutcomeClass::Loss;
    const auto half = post_select_loss(shots);
    REQUIRE(half.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(half[i].shot == 2 * i + 1);
    for (auto& s : shots) s.cls[1] = readout::OutcomeClass::Loss;
    CHECK(post_select_loss(shots).empty());
}

TEST_CASE("binomial errors and shot seeds") {
    CHECK(binomial_std_err(0, 100) > 0.0);
    CHECK(binomial_std_err(100, 100) > 0.0);
    CHECK(binomial_std_err(50, 100) == doctest::Approx(std::sqrt(0.5 * 0.5 / 102)).epsilon(0.05));
    CHECK(shot_seed(1, 0, 0, 0, 0) != shot_seed(1, 0, 0, 0, 1));
    CHECK(shot_seed(1, 0, 0, 1, 0) != shot_seed(1, 0, 1, 0, 0));
    CHECK(shot_seed(1, 0, 0, 0, 0) != shot_seed(2, 0, 0, 0, 0));
    CHECK(shot_seed(9, 1, 2, 3, 4) == shot_seed(9, 1, 2, 3, 4));
}

TEST_CASE("noise-free benchmarking stays at unit return probability") {
    const czgate::BlockadeModel m;
    auto cfg = small_config();
    cfg.ideal_gate = true;
    const auto r = run_rb(cfg, m, czgate::default_profile(m), NoiseModel{}, std::nullopt);
    for (const auto& p : r.points) {
        CHECK(p.return_prob == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(p.n_kept == p.n_shots);
    }
    CHECK(r.p_raw == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.p_corrected == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pulse-level gate without noise stays near unit return probability") {
    const czgate::BlockadeModel m;
    auto cfg = small_config();
    cfg.randomizations = 4;
    cfg.shots = 10;
    const auto r = run_rb(cfg, m, czgate::default_profile(m), NoiseModel{}, std::nullopt);
    for (const auto& p : r.points) CHECK(p.return_prob >= 0.97);
}

TEST_CASE("shot records and bookkeeping") {
    const czgate::BlockadeModel m;
    auto cfg = small_config();
    cfg.ideal_gate = true;
    cfg.record_shots = true;
    NoiseModel n;
    n.loss_prob_gate = 0.01;
    n.prep_error = 0.02;
    const auto r = run_rb(cfg, m, czgate::default_profile(m), n, ReadoutModel{{}, {6, 16}});
    CHECK(r.shots.size() == cfg.n_cz_list.size() * std::size_t(cfg.randomizations * cfg.shots));
    for (const auto& p : r.points) {
        CHECK(p.n_shots == std::size_t(cfg.randomizations * cfg.shots));
        CHECK(p.n_kept <= p.n_shots);
    }
    std::size_t kept = 0;
    for (const auto& s : r.shots)
        if (s.n_cz == cfg.n_cz_list.back() && !s.any_loss()) ++kept;
    CHECK(kept == r.points.back().n_kept);
}

TEST_CASE("results do not depend on the worker count") {
    const czgate::BlockadeModel m;
    auto cfg = small_config();
    cfg.n_cz_list = {2, 20, 40};
    cfg.randomizations = 6;
    cfg.shots = 20;
    cfg.record_shots = true;
    NoiseModel n;
    n.doppler_sigma = 3e5;
    n.loss_prob_gate = 0.003;
    n.scatter_prob_gate = 0.001;
    const auto a = run_rb(cfg, m, czgate::default_profile(m), n, ReadoutModel{{}, {6, 16}});
    cfg.workers = 3;
    const auto b = run_rb(cfg, m, czgate::default_profile(m), n, ReadoutModel{{}, {6, 16}});
    CHECK(a.f_raw == b.f_raw);
    CHECK(a.f_corrected == b.f_corrected);
    REQUIRE(a.shots.size() == b.shots.size());
    for (std::size_t i = 0; i < a.shots.size(); ++i) {
        CHECK(a.shots[i].c1 == b.shots[i].c1);
        CHECK(a.shots[i].cls == b.shots[i].cls);
    }
}

TEST_CASE("corrected fidelity falls as the Doppler width grows") {
    const czgate::BlockadeModel m;
    auto cfg = small_config();
    cfg.n_cz_list = {2, 40, 100, 200};
    cfg.randomizations = 16;
    cfg.shots = 100;
    double prev = 2.0, prev_err = 0.0;
    for (double sigma : {0.0, 2e6, 4e6, 8e6}) {
        NoiseModel n;
        n.doppler_sigma = sigma;
        const auto r = run_rb(cfg, m, czgate::default_profile(m), n, ReadoutModel{{}, {6, 16}});
        const double err = 0.75 * r.fit_corrected.std_err;
        CHECK(r.f_corrected <= prev + 2 * std::hypot(err, prev_err));
        prev = r.f_corrected, prev_err = err;
    }
}

TEST_CASE("heating convolves with a Poisson kick") {
    const auto mode = motional::thermal_mode(2 * kPi * 1e5, 0.16, 1.0, motional::ModeLabel::Radial);
    for (double h : {0.0, 0.5, 3.0, 200.0}) CHECK(heat_mode(mode, h).nbar() == doctest::Approx(1.0 + h).epsilon(1e-7));
    CHECK_THROWS_AS(heat_mode(mode, -1.0), std::invalid_argument);
}

TEST_CASE("rounds without heating hold their fidelity") {
    const czgate::BlockadeModel m;
    MotionConfig mc;
    mc.modes = {motional::thermal_mode(2 * kPi * 1e5, 0.16, 1.0, motional::ModeLabel::Radial),
                motional::thermal_mode(2 * kPi * 2e4, 0.16 * std::sqrt(5.0), 1.0, motional::ModeLabel::Axial)};
    mc.direction_cosines = {1.0, 0.0};
    mc.k_eff = motional::counter_propagating_k(420e-9, 1013e-9);
    auto cfg = small_config();
    NoiseModel n;
    n.scatter_prob_gate = 1e-3;
    n.loss_prob_gate = 1e-3;
    for (auto kind : {PolicyKind::NoCooling, PolicyKind::LocalGM, PolicyKind::RSC}) {
        RoundPolicy pol;
        pol.kind = kind;
        pol.rsc_stages = default_rsc_stages(mc.modes);
        const auto rounds = run_rounds(3, pol, 0.0, mc, cfg, m, czgate::default_profile(m), n, std::nullopt);
        REQUIRE(rounds.size() == 3);
        for (const auto& r : rounds) {
            CHECK(std::abs(r.f_corrected - rounds[0].f_corrected) <=
                  3 * std::hypot(r.corrected_std_err, rounds[0].corrected_std_err));
            CHECK(r.nbar[0] <= 1.0 + 1e-9);
        }
    }
    const auto one = run_rounds(1, RoundPolicy{PolicyKind::NoCooling, 4.0, {}}, 200.0, mc, cfg, m,
                                czgate::default_profile(m), n, std::nullopt);
    REQUIRE(one.size() == 1);
    CHECK(one[0].nbar[0] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("noise validation") {
    NoiseModel n;
    n.loss_prob_gate = 1.2;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    n = NoiseModel{};
    n.doppler_sigma = -1.0;
    CHECK_THROWS_AS(n.validate(), std::invalid_argument);
    RBConfig c;
    c.n_cz_list = {2, 3};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.n_cz_list = {4, 2};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
