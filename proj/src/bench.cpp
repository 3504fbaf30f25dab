#include "rydberg/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <limits>
#include <mutex>
#include <thread>

namespace rydberg::bench {

namespace {

constexpr double kPi = czgate::kPi;
const Complex kI{0.0, 1.0};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool bernoulli(double p, Rng& rng) { return p > 0.0 && uniform(rng) < p; }

void require_prob(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + ": must lie in [0, 1]");
}

// Two-atom register restricted to the qubit levels; index 2 a + b. A lost
// atom is parked in |0> and ignored by every later operation.
struct Register {
    std::array<Complex, 4> psi{1.0, 0.0, 0.0, 0.0};
    std::array<bool, 2> lost{false, false};

    void apply(int atom, const Mat2& u) {
        if (lost[atom]) return;
        for (int other = 0; other < 2; ++other) {
            const int i0 = atom == 0 ? other : 2 * other;
            const int i1 = atom == 0 ? 2 + other : 2 * other + 1;
            const Complex a = psi[i0], b = psi[i1];
            psi[i0] = u[0][0] * a + u[0][1] * b;
            psi[i1] = u[1][0] * a + u[1][1] * b;
        }
    }

    void normalize() {
        double n = 0.0;
        for (const auto& z : psi) n += std::norm(z);
        n = std::sqrt(n);
        for (auto& z : psi) z /= n;
    }

    // Projective Z measurement of one atom followed by removal from the trap.
    void lose(int atom, Rng& rng) {
        if (lost[atom]) return;
        double p1 = 0.0;
        for (int i = 0; i < 4; ++i)
            if (((atom == 0 ? i >> 1 : i) & 1) == 1) p1 += std::norm(psi[i]);
        const bool one = uniform(rng) < p1;
        std::array<Complex, 4> out{};
        for (int i = 0; i < 4; ++i) {
            const int bit = (atom == 0 ? i >> 1 : i) & 1;
            if (bit != static_cast<int>(one)) continue;
            const int j = atom == 0 ? (i & 1) : (i & 2);
            out[j] = psi[i];
        }
        psi = out;
        lost[atom] = true;
        normalize();
    }
};

const std::array<Mat2, 4>& paulis() {
    static const std::array<Mat2, 4> p{{
        {{{1.0, 0.0}, {0.0, 1.0}}},
        {{{0.0, 1.0}, {1.0, 0.0}}},
        {{{0.0, -kI}, {kI, 0.0}}},
        {{{1.0, 0.0}, {0.0, -1.0}}},
    }};
    return p;
}

void random_pauli(Register& reg, int atom, Rng& rng) {
    const auto k = std::uniform_int_distribution<int>(0, 3)(rng);
    reg.apply(atom, paulis()[static_cast<std::size_t>(k)]);
}

void apply_rotation(Register& reg, const Mat2& u, double error, Rng& rng) {
    for (int atom = 0; atom < 2; ++atom) {
        if (reg.lost[atom]) continue;
        reg.apply(atom, u);
        if (bernoulli(error, rng)) random_pauli(reg, atom, rng);
    }
}

// Applies the gate and collapses any residual Rydberg population: atoms
// found in |r> are expelled.
void apply_gate(Register& reg, const czgate::GateResult& g, Rng& rng) {
    using czgate::product_index;
    std::array<Complex, czgate::kProductDim> out{};
    for (std::size_t c = 0; c < 4; ++c) {
        if (reg.psi[c] == Complex{}) continue;
        for (std::size_t r = 0; r < czgate::kProductDim; ++r) out[r] += g.propagator[c][r] * reg.psi[c];
    }
    const auto w = [&](std::initializer_list<std::size_t> rows) {
        double s = 0.0;
        for (auto r : rows) s += std::norm(out[r]);
        return s;
    };
    const double p_none = w({0, 1, 3, 4});
    const double p_a = w({product_index(2, 0), product_index(2, 1)});
    const double p_b = w({product_index(0, 2), product_index(1, 2)});
    const double p_both = w({product_index(2, 2)});
    const double total = p_none + p_a + p_b + p_both;
    const double u = uniform(rng) * total;

    if (u < p_none || p_a + p_b + p_both == 0.0) {
        reg.psi = {out[0], out[1], out[3], out[4]};
    } else if (u < p_none + p_a) {
        reg.psi = {out[product_index(2, 0)], out[product_index(2, 1)], 0.0, 0.0};
        reg.lost[0] = true;
    } else if (u < p_none + p_a + p_b) {
        reg.psi = {out[product_index(0, 2)], 0.0, out[product_index(1, 2)], 0.0};
        reg.lost[1] = true;
    } else {
        reg.psi = {1.0, 0.0, 0.0, 0.0};
        reg.lost = {true, true};
        return;
    }
    reg.normalize();
}

void gate_noise(Register& reg, const NoiseModel& n, Rng& rng) {
    for (int atom = 0; atom < 2; ++atom) {
        if (reg.lost[atom]) continue;
        if (bernoulli(n.loss_prob_gate, rng)) {
            reg.lose(atom, rng);
            continue;
        }
        if (bernoulli(n.recycle_prob_gate, rng)) random_pauli(reg, atom, rng);
        if (bernoulli(n.scatter_prob_gate, rng)) random_pauli(reg, atom, rng);
    }
    if (bernoulli(n.depolarizing_prob_gate, rng))
        for (int atom = 0; atom < 2; ++atom) random_pauli(reg, atom, rng);
}

czgate::GateResult exact_cz() {
    czgate::GateResult g;
    for (std::size_t c = 0; c < 4; ++c) {
        const Complex v = c == 3 ? -1.0 : 1.0;
        g.propagator[c][czgate::kComputationalRows[c]] = v;
        g.unitary_on_comp[c][c] = v;
    }
    g.fidelity = 1.0;
    return g;
}

czgate::GateResult perturbed_gate(const RBConfig& cfg, const czgate::BlockadeModel& model,
                                  const czgate::PulseProfile& profile, double sigma, Rng& rng) {
    std::normal_distribution<double> nd(0.0, sigma);
    czgate::AtomPerturbation pert;
    pert.detuning = {nd(rng), nd(rng)};
    return czgate::simulate_gate(profile, model, pert, cfg.sim);
}

struct UnitTally {
    std::size_t returned = 0;
    std::size_t kept = 0;
    std::size_t kept_returned = 0;
    std::vector<ShotRecord> shots;
};

Mat2 pauli_x_rotation() { return GlobalRotation{0.0, kPi, 0.0}.matrix(); }

}  // namespace

Mat2 GlobalRotation::matrix() const {
    const Complex ea = std::exp(-0.5 * kI * axis_phase);
    const Complex ez = std::exp(-0.5 * kI * z_phase);
    const double c = std::cos(0.5 * polar), s = std::sin(0.5 * polar);
    // Rz(a) Rx(t) Rz(z)
    return {{{ea * c * ez, -kI * ea * s * std::conj(ez)},
             {-kI * std::conj(ea) * s * ez, std::conj(ea) * c * std::conj(ez)}}};
}

GlobalRotation to_rotation(const Mat2& u) {
    const Complex det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    const Complex g = std::sqrt(det);
    const Complex a = u[0][0] / g, b = u[1][0] / g;
    GlobalRotation r;
    r.polar = 2.0 * std::atan2(std::abs(b), std::abs(a));
    // a = e^{-i(al+ga)/2} cos, b = -i e^{i(al-ga)/2} sin
    const double sum = std::abs(a) > 1e-300 ? -2.0 * std::arg(a) : 0.0;
    const double diff = std::abs(b) > 1e-300 ? 2.0 * (std::arg(b) + 0.5 * kPi) : 0.0;
    r.axis_phase = 0.5 * (sum + diff);
    r.z_phase = 0.5 * (sum - diff);
    return r;
}

GlobalRotation sample_haar_rotation(Rng& rng) {
    GlobalRotation r;
    r.axis_phase = 2.0 * kPi * uniform(rng);
    r.polar = std::acos(1.0 - 2.0 * uniform(rng));
    r.z_phase = 2.0 * kPi * uniform(rng);
    return r;
}

Mat2 mul(const Mat2& a, const Mat2& b) {
    Mat2 c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return c;
}

Mat2 adjoint(const Mat2& a) {
    return {{{std::conj(a[0][0]), std::conj(a[1][0])}, {std::conj(a[0][1]), std::conj(a[1][1])}}};
}

Mat4 mul(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 c{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) c[i][j] = a[i >> 1][j >> 1] * b[i & 1][j & 1];
    return c;
}

Mat4 cz_matrix() {
    Mat4 c{};
    c[0][0] = c[1][1] = c[2][2] = 1.0;
    c[3][3] = -1.0;
    return c;
}

RBSequence build_sequence(int n_cz, Rng& rng) {
    if (n_cz < 0 || n_cz % 2 != 0)
        throw std::invalid_argument("n_cz must be even and >= 0 (got " + std::to_string(n_cz) + ")");
    RBSequence seq;
    seq.n_cz = n_cz;
    // Each echoed pair CZ (X x X) CZ (R x R) is (Y R) x (Y R).
    const Mat2 y = paulis()[2];
    Mat2 net{{{1.0, 0.0}, {0.0, 1.0}}};
    for (int k = 0; k < n_cz / 2; ++k) {
        const auto r = sample_haar_rotation(rng);
        seq.rotations.push_back(r);
        seq.echo_flags.push_back(2 * k);
        net = mul(y, mul(r.matrix(), net));
    }
    seq.r_f = to_rotation(adjoint(net));
    return seq;
}

double ideal_return_probability(const RBSequence& seq) {
    const Mat4 cz = cz_matrix();
    const Mat2 x = paulis()[1];
    const Mat4 xx = kron(x, x);
    Mat4 total{};
    for (int i = 0; i < 4; ++i) total[i][i] = 1.0;
    for (const auto& r : seq.rotations) {
        const Mat2 u = r.matrix();
        total = mul(kron(u, u), total);
        total = mul(cz, total);
        total = mul(xx, total);
        total = mul(cz, total);
    }
    const Mat2 f = seq.r_f.matrix();
    total = mul(kron(f, f), total);
    return std::norm(total[0][0]);
}

void NoiseModel::validate() const {
    if (!(doppler_sigma >= 0.0) || !std::isfinite(doppler_sigma))
        throw std::invalid_argument("doppler_sigma: must be finite and >= 0");
    require_prob(loss_prob_gate, "loss_prob_gate");
    require_prob(recycle_prob_gate, "recycle_prob_gate");
    require_prob(scatter_prob_gate, "scatter_prob_gate");
    require_prob(prep_error, "prep_error");
    require_prob(single_qubit_error, "single_qubit_error");
    require_prob(depolarizing_prob_gate, "depolarizing_prob_gate");
}

void RBConfig::validate() const {
    if (n_cz_list.empty()) throw std::invalid_argument("n_cz_list: must not be empty");
    for (std::size_t i = 0; i < n_cz_list.size(); ++i) {
        if (n_cz_list[i] < 0 || n_cz_list[i] % 2 != 0)
            throw std::invalid_argument("n_cz_list: entries must be even and >= 0");
        if (i > 0 && n_cz_list[i] <= n_cz_list[i - 1])
            throw std::invalid_argument("n_cz_list: must be strictly ascending");
    }
    if (randomizations < 1) throw std::invalid_argument("randomizations: must be >= 1");
    if (shots < 1) throw std::invalid_argument("shots: must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers: must be >= 1");
    if (!(sim.steps_per_period > 0.0)) throw std::invalid_argument("steps_per_period: must be > 0");
}

std::string_view to_string(FitMode m) { return m == FitMode::Raw ? "raw" : "corrected"; }

double asymptote(FitMode m) { return m == FitMode::Raw ? 0.0 : 0.25; }

FitResult fit_decay(std::span<const DecayPoint> points, FitMode mode, double initial_amplitude) {
    if (points.size() < 3) throw std::invalid_argument("fit_decay: at least 3 points required");
    for (const auto& pt : points)
        if (!(pt.std_err > 0.0) || !std::isfinite(pt.y) || !std::isfinite(pt.n))
            throw std::invalid_argument("fit_decay: points need finite values and std_err > 0");
    const double c = asymptote(mode);

    // Log-linear start on the points above the asymptote.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (const auto& pt : points) {
        if (pt.y - c <= 1e-12) continue;
        const double l = std::log(pt.y - c);
        sx += pt.n, sy += l, sxx += pt.n * pt.n, sxy += pt.n * l, m += 1;
    }
    double p = 0.99;
    if (m >= 2 && m * sxx - sx * sx > 0.0) p = std::clamp(std::exp((m * sxy - sx * sy) / (m * sxx - sx * sx)), 1e-6, 1.0);
    double a = initial_amplitude;

    const auto chi2 = [&](double aa, double pp) {
        double s = 0.0;
        for (const auto& pt : points) {
            const double r = (pt.y - aa * std::pow(pp, pt.n) - c) / pt.std_err;
            s += r * r;
        }
        return s;
    };
    // Normal matrix J^T W J and gradient J^T W r at (a, p).
    const auto normal = [&](double aa, double pp, std::array<double, 3>& n, std::array<double, 2>& g) {
        n = {0, 0, 0};
        g = {0, 0};
        for (const auto& pt : points) {
            const double w = 1.0 / (pt.std_err * pt.std_err);
            const double pn = std::pow(pp, pt.n);
            const double ja = pn;
            const double jp = pt.n == 0.0 ? 0.0 : aa * pt.n * std::pow(pp, pt.n - 1.0);
            const double r = pt.y - aa * pn - c;
            n[0] += w * ja * ja, n[1] += w * ja * jp, n[2] += w * jp * jp;
            g[0] += w * ja * r, g[1] += w * jp * r;
        }
    };

    FitResult res;
    double lambda = 1e-3;
    double current = chi2(a, p);
    constexpr int kMaxIter = 500;
    for (int it = 1; it <= kMaxIter; ++it) {
        res.iterations = it;
        std::array<double, 3> n;
        std::array<double, 2> g;
        normal(a, p, n, g);
        bool accepted = false;
        double da = 0, dp = 0;
        while (lambda < 1e14) {
            const double n00 = n[0] * (1.0 + lambda), n11 = n[2] * (1.0 + lambda), n01 = n[1];
            const double det = n00 * n11 - n01 * n01;
            if (det <= 0.0 || !std::isfinite(det)) {
                lambda *= 10.0;
                continue;
            }
            da = (n11 * g[0] - n01 * g[1]) / det;
            dp = (n00 * g[1] - n01 * g[0]) / det;
            const double na = a + da, np = std::clamp(p + dp, 0.0, 1.0);
            const double trial = chi2(na, np);
            if (trial <= current) {
                dp = np - p;
                a = na, p = np;
                accepted = trial < current || (da == 0.0 && dp == 0.0);
                current = trial;
                lambda = std::max(lambda * 0.1, 1e-12);
                break;
            }
            lambda *= 10.0;
        }
        if (lambda >= 1e14 || (accepted && std::abs(dp) < 1e-14 && std::abs(da) < 1e-14 * (1.0 + std::abs(a))) ||
            (!accepted && std::abs(dp) < 1e-14 && std::abs(da) < 1e-14 * (1.0 + std::abs(a)))) {
            res.converged = true;
            break;
        }
    }

    std::array<double, 3> n;
    std::array<double, 2> g;
    normal(a, p, n, g);
    const double det = n[0] * n[2] - n[1] * n[1];
    res.p = p;
    res.amplitude = a;
    res.std_err = det > 0.0 ? std::sqrt(n[0] / det) : std::numeric_limits<double>::infinity();
    return res;
}

double fidelity_from_decay(double p, FitMode mode) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("fidelity_from_decay: p must lie in [0, 1]");
    return mode == FitMode::Raw ? p : 1.0 - 0.75 * (1.0 - p);
}

bool ShotRecord::any_loss() const {
    return cls[0] == readout::OutcomeClass::Loss || cls[1] == readout::OutcomeClass::Loss;
}

bool ShotRecord::returned() const {
    return cls[0] == readout::OutcomeClass::Zero && cls[1] == readout::OutcomeClass::Zero;
}

std::vector<ShotRecord> post_select_loss(std::span<const ShotRecord> shots) {
    std::vector<ShotRecord> out;
    std::copy_if(shots.begin(), shots.end(), std::back_inserter(out), [](const auto& s) { return !s.any_loss(); });
    return out;
}

double binomial_std_err(std::size_t successes, std::size_t trials) {
    if (trials == 0) return 1.0;
    const double q = (static_cast<double>(successes) + 1.0) / (static_cast<double>(trials) + 2.0);
    return std::sqrt(q * (1.0 - q) / static_cast<double>(trials));
}

std::uint64_t shot_seed(std::uint64_t seed, int round, int point, int randomization, int shot) {
    std::uint64_t h = splitmix64(seed);
    for (const std::int64_t v : {std::int64_t{round}, std::int64_t{point}, std::int64_t{randomization},
                                 std::int64_t{shot}})
        h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return h;
}

RBResult run_rb(const RBConfig& cfg, const czgate::BlockadeModel& model, const czgate::PulseProfile& profile,
                const NoiseModel& noise, const std::optional<ReadoutModel>& ro) {
    cfg.validate();
    noise.validate();
    model.validate();
    profile.validate();
    if (ro) {
        ro->imaging.validate();
        ro->thresholds.validate();
    }

    const bool doppler = !cfg.ideal_gate && noise.doppler_sigma > 0.0;
    const czgate::GateResult fixed_gate =
        cfg.ideal_gate ? exact_cz() : czgate::simulate_gate(profile, model, std::nullopt, cfg.sim);
    const Mat2 x_echo = pauli_x_rotation();

    const auto n_points = static_cast<int>(cfg.n_cz_list.size());
    const std::size_t n_units = static_cast<std::size_t>(n_points) * static_cast<std::size_t>(cfg.randomizations);
    std::vector<UnitTally> tallies(n_units);

    const auto run_unit = [&](std::size_t unit) {
        const int point = static_cast<int>(unit / static_cast<std::size_t>(cfg.randomizations));
        const int rnd = static_cast<int>(unit % static_cast<std::size_t>(cfg.randomizations));
        Rng seq_rng(shot_seed(cfg.seed, cfg.round, point, rnd, -1));
        const RBSequence seq = build_sequence(cfg.n_cz_list[static_cast<std::size_t>(point)], seq_rng);
        std::vector<Mat2> rot;
        for (const auto& r : seq.rotations) rot.push_back(r.matrix());
        const Mat2 r_f = seq.r_f.matrix();

        UnitTally& t = tallies[unit];
        if (cfg.record_shots) t.shots.reserve(static_cast<std::size_t>(cfg.shots));
        for (int shot = 0; shot < cfg.shots; ++shot) {
            Rng rng(shot_seed(cfg.seed, cfg.round, point, rnd, shot));
            Register reg;
            for (int atom = 0; atom < 2; ++atom)
                if (bernoulli(noise.prep_error, rng)) reg.apply(atom, paulis()[1]);

            czgate::GateResult shot_gate;
            const czgate::GateResult* gate = &fixed_gate;
            if (doppler && !noise.doppler_per_gate) {
                shot_gate = perturbed_gate(cfg, model, profile, noise.doppler_sigma, rng);
                gate = &shot_gate;
            }
            const auto cz = [&]() {
                if (doppler && noise.doppler_per_gate) {
                    shot_gate = perturbed_gate(cfg, model, profile, noise.doppler_sigma, rng);
                    gate = &shot_gate;
                }
                apply_gate(reg, *gate, rng);
                gate_noise(reg, noise, rng);
            };
            for (const auto& u : rot) {
                apply_rotation(reg, u, noise.single_qubit_error, rng);
                cz();
                apply_rotation(reg, x_echo, noise.single_qubit_error, rng);
                cz();
            }
            apply_rotation(reg, r_f, noise.single_qubit_error, rng);

            // Projective readout of both atoms.
            std::array<double, 4> prob{};
            for (int i = 0; i < 4; ++i) prob[i] = std::norm(reg.psi[i]);
            const double u = uniform(rng) * (prob[0] + prob[1] + prob[2] + prob[3]);
            int outcome = 3;
            for (double acc = 0.0; int i : {0, 1, 2, 3}) {
                acc += prob[i];
                if (u < acc) {
                    outcome = i;
                    break;
                }
            }
            ShotRecord rec{cfg.round, seq.n_cz, rnd, shot, {}, {}, {}};
            for (int atom = 0; atom < 2; ++atom) {
                const int bit = atom == 0 ? outcome >> 1 : outcome & 1;
                const auto truth = reg.lost[atom] ? readout::TrueState::Lost
                                   : bit ? readout::TrueState::One
                                         : readout::TrueState::Zero;
                if (ro) {
                    const auto c = readout::simulate_counts(truth, ro->imaging, rng);
                    const auto o = readout::classify(c.c1, c.c2, ro->thresholds);
                    rec.cls[atom] = o.cls;
                    rec.c1[atom] = c.c1;
                    rec.c2[atom] = c.c2;
                } else {
                    rec.cls[atom] = static_cast<readout::OutcomeClass>(static_cast<int>(truth));
                }
            }
            t.returned += rec.returned();
            if (!rec.any_loss()) {
                ++t.kept;
                t.kept_returned += rec.returned();
            }
            if (cfg.record_shots) t.shots.push_back(rec);
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), n_units);
    if (workers <= 1) {
        for (std::size_t u = 0; u < n_units; ++u) run_unit(u);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::mutex failure_mutex;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                try {
                    for (std::size_t u; (u = next.fetch_add(1)) < n_units;) run_unit(u);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n_units;
                }
            });
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    RBResult res;
    for (int pt = 0; pt < n_points; ++pt) {
        RBPoint p;
        p.n_cz = cfg.n_cz_list[static_cast<std::size_t>(pt)];
        std::size_t returned = 0, kept_returned = 0;
        for (int r = 0; r < cfg.randomizations; ++r) {
            auto& t = tallies[static_cast<std::size_t>(pt * cfg.randomizations + r)];
            returned += t.returned;
            p.n_kept += t.kept;
            kept_returned += t.kept_returned;
            p.n_shots += static_cast<std::size_t>(cfg.shots);
            if (cfg.record_shots) res.shots.insert(res.shots.end(), t.shots.begin(), t.shots.end());
        }
        p.return_prob = static_cast<double>(returned) / static_cast<double>(p.n_shots);
        p.std_err = binomial_std_err(returned, p.n_shots);
        p.return_prob_kept = p.n_kept ? static_cast<double>(kept_returned) / static_cast<double>(p.n_kept) : 0.0;
        p.std_err_kept = binomial_std_err(kept_returned, p.n_kept);
        res.points.push_back(p);
    }

    std::vector<DecayPoint> raw, kept;
    for (const auto& p : res.points) {
        raw.push_back({static_cast<double>(p.n_cz), p.return_prob, p.std_err});
        if (p.n_kept > 0) kept.push_back({static_cast<double>(p.n_cz), p.return_prob_kept, p.std_err_kept});
    }
    if (raw.size() >= 3) {
        res.fit_raw = fit_decay(raw, FitMode::Raw, raw.front().y);
        res.p_raw = res.fit_raw.p;
        res.f_raw = fidelity_from_decay(res.p_raw, FitMode::Raw);
    }
    if (kept.size() >= 3) {
        res.fit_corrected = fit_decay(kept, FitMode::Corrected, kept.front().y - 0.25);
        res.p_corrected = res.fit_corrected.p;
        res.f_corrected = fidelity_from_decay(res.p_corrected, FitMode::Corrected);
    }
    return res;
}

std::string_view to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::NoCooling: return "no_cooling";
        case PolicyKind::LocalGM: return "local_gm";
        case PolicyKind::RSC: return "rsc";
    }
    return "?";
}

motional::MotionalMode heat_mode(const motional::MotionalMode& mode, double phonons) {
    if (!(phonons >= 0.0) || !std::isfinite(phonons))
        throw std::invalid_argument("heating_per_round: must be finite and >= 0");
    if (phonons == 0.0) return mode;
    std::vector<double> kick;
    double term = std::exp(-phonons), cum = 0.0;
    for (int k = 0; cum < 1.0 - 1e-15 && k < 100000; ++k) {
        kick.push_back(term);
        cum += term;
        term *= phonons / static_cast<double>(k + 1);
    }
    const auto dist = mode.dist();
    std::vector<double> out(dist.size() + kick.size() - 1, 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i)
        for (std::size_t k = 0; k < kick.size(); ++k) out[i + k] += dist[i] * kick[k];
    while (out.size() > 1 && out.back() < 1e-18) out.pop_back();
    const double s = std::accumulate(out.begin(), out.end(), 0.0);
    for (double& v : out) v /= s;
    return mode.with_dist(std::move(out));
}

std::vector<RscStage> default_rsc_stages(std::span<const motional::MotionalMode> modes) {
    std::vector<RscStage> out;
    for (const auto& spec : kDefaultRscStages) {
        RscStage st;
        for (const auto& m : modes) {
            auto cfg = motional::default_rsc_config(m.lamb_dicke());
            cfg.pulse_time = spec.pulse_area / (m.lamb_dicke() * cfg.carrier_rabi);
            cfg.cycles = spec.cycles_per_mode;
            st.per_mode.push_back(cfg);
        }
        st.cycles = spec.cycles_per_mode * static_cast<int>(modes.size());
        out.push_back(std::move(st));
    }
    return out;
}

std::vector<RoundResult> run_rounds(int n_rounds, const RoundPolicy& policy, double heating_per_round,
                                    const MotionConfig& motion, const RBConfig& rb, const czgate::BlockadeModel& model,
                                    const czgate::PulseProfile& profile, const NoiseModel& noise,
                                    const std::optional<ReadoutModel>& readout) {
    if (n_rounds < 1) throw std::invalid_argument("n_rounds: must be >= 1");
    if (motion.modes.empty()) throw std::invalid_argument("motion: no modes");
    if (policy.kind == PolicyKind::RSC)
        for (const auto& st : policy.rsc_stages) {
            if (st.per_mode.size() != motion.modes.size())
                throw std::invalid_argument("rsc: one cooling config per mode required");
            if (st.cycles < 0) throw std::invalid_argument("rsc: cycles must be >= 0");
        }
    if (policy.kind == PolicyKind::LocalGM && !(policy.gm_floor >= 0.0))
        throw std::invalid_argument("gm_floor: must be >= 0");

    std::vector<motional::MotionalMode> modes = motion.modes;
    std::vector<RoundResult> out;
    for (int round = 1; round <= n_rounds; ++round) {
        if (round > 1) {
            for (auto& m : modes) m = heat_mode(m, heating_per_round);
            switch (policy.kind) {
                case PolicyKind::NoCooling: break;
                case PolicyKind::LocalGM:
                    for (auto& m : modes)
                        if (m.nbar() > policy.gm_floor)
                            m = motional::thermal_mode(m.trap_freq(), m.lamb_dicke(), policy.gm_floor, m.label());
                    break;
                case PolicyKind::RSC:
                    for (const auto& st : policy.rsc_stages) modes = motional::rsc_schedule(modes, st.per_mode, st.cycles);
                    break;
            }
        }
        RoundResult r;
        r.round = round;
        for (const auto& m : modes) r.nbar.push_back(m.nbar());
        r.doppler_sigma = motional::doppler_sigma(modes, motion.direction_cosines, motion.k_eff, motion.atom_mass);
        NoiseModel n = noise;
        n.doppler_sigma = r.doppler_sigma;
        RBConfig cfg = rb;
        cfg.round = round;
        r.rb = run_rb(cfg, model, profile, n, readout);
        r.f_corrected = r.rb.f_corrected;
        r.f_raw = r.rb.f_raw;
        r.corrected_std_err = 0.75 * r.rb.fit_corrected.std_err;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace rydberg::bench
