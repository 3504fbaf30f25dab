#include "rydberg/czgate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rydberg::czgate {

namespace {

const double kSqrt2 = std::sqrt(2.0);

void require(bool ok, const char* field, const char* what) {
    if (!ok) throw std::invalid_argument(std::string(field) + ": " + what);
}

// No window check; RK4 stage times may overshoot T by rounding.
double phase_unchecked(double t, const PulseProfile& p) {
    return p.amp * std::sin(kTwoPi * p.mod_freq_cycles * t / p.duration + p.phase0) +
           p.detuning_slope * t;
}

void fill_symmetric(const BlockadeModel& model, double phi, double detuning, double scale,
                    OperatorMatrix& h) {
    const Complex drive = 0.5 * model.omega * scale * std::polar(1.0, phi);
    h(k0r, k01) = drive;
    h(k01, k0r) = std::conj(drive);
    h(kr0, k10) = drive;
    h(k10, kr0) = std::conj(drive);
    h(kW, k11) = kSqrt2 * drive;
    h(k11, kW) = kSqrt2 * std::conj(drive);
    h(k0r, k0r) = detuning;
    h(kr0, kr0) = detuning;
    h(kW, kW) = detuning;
    if (!model.perfect_blockade()) {
        h(krr, kW) = kSqrt2 * drive;
        h(kW, krr) = kSqrt2 * std::conj(drive);
        h(krr, krr) = model.blockade_v + 2.0 * detuning;
    }
}

void fill_product(const BlockadeModel& model, double phi, const AtomPerturbation& pert,
                  OperatorMatrix& h) {
    const Complex e = std::polar(1.0, phi);
    constexpr std::size_t kOne = 1, kRyd = 2;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            const std::size_t i = product_index(a, b);
            if (a == kRyd && b == kRyd && model.perfect_blockade()) continue;
            // atom A: |1> -> |r>
            if (a == kOne && !(b == kRyd && model.perfect_blockade())) {
                const Complex d = 0.5 * model.omega * pert.omega_scale[0] * e;
                const std::size_t j = product_index(kRyd, b);
                h(j, i) += d;
                h(i, j) += std::conj(d);
            }
            // atom B: |1> -> |r>
            if (b == kOne && !(a == kRyd && model.perfect_blockade())) {
                const Complex d = 0.5 * model.omega * pert.omega_scale[1] * e;
                const std::size_t j = product_index(a, kRyd);
                h(j, i) += d;
                h(i, j) += std::conj(d);
            }
            double diag = 0.0;
            if (a == kRyd) diag += pert.detuning[0];
            if (b == kRyd) diag += pert.detuning[1];
            if (a == kRyd && b == kRyd) diag += model.blockade_v;
            h(i, i) += diag;
        }
    }
}

constexpr std::array<std::size_t, 4> kSymComp{k00, k01, k10, k11};

int rydberg_count_product(std::size_t idx) { return (idx / 3 == 2) + (idx % 3 == 2); }
int rydberg_count_symmetric(std::size_t idx) { return idx == krr ? 2 : (idx >= k0r ? 1 : 0); }
int ones_count_product(std::size_t idx) { return (idx / 3 == 1) + (idx % 3 == 1); }

// Maps a symmetric-basis state into the product basis.
std::array<Complex, kProductDim> to_product(const qdyn::StateVector& s) {
    std::array<Complex, kProductDim> out{};
    out[product_index(0, 0)] = s[k00];
    out[product_index(0, 1)] = s[k01];
    out[product_index(1, 0)] = s[k10];
    out[product_index(1, 1)] = s[k11];
    out[product_index(0, 2)] = s[k0r];
    out[product_index(2, 0)] = s[kr0];
    out[product_index(1, 2)] = s[kW] / kSqrt2;
    out[product_index(2, 1)] = s[kW] / kSqrt2;
    if (s.dim() > krr) out[product_index(2, 2)] = s[krr];
    return out;
}

// Fastest rate in H: the enhanced drive, or |rr> and the detunings when present.
double max_drive(const BlockadeModel& model, const std::optional<AtomPerturbation>& pert) {
    double scale = 1.0, det = 0.0;
    if (pert) {
        scale = std::max(std::abs(pert->omega_scale[0]), std::abs(pert->omega_scale[1]));
        det = std::abs(pert->detuning[0]) + std::abs(pert->detuning[1]);
    }
    double rate = std::max(kSqrt2 * model.omega * std::max(scale, 1e-300), det);
    if (!model.perfect_blockade()) rate = std::max(rate, model.blockade_v + det);
    return rate;
}

constexpr std::size_t kMaxSteps = 20'000'000;

}  // namespace

void BlockadeModel::validate() const {
    require(std::isfinite(omega) && omega > 0.0, "omega", "must be finite and > 0");
    require(std::isfinite(delta_int), "delta_int", "must be finite");
    require(!std::isnan(blockade_v) && blockade_v > 0.0, "blockade_v", "must be > 0 or infinite");
    require(std::isfinite(gamma_rydberg) && gamma_rydberg >= 0.0, "gamma_rydberg", "must be >= 0");
    require(bbr_fraction >= 0.0 && bbr_fraction <= 1.0, "bbr_fraction", "must lie in [0, 1]");
    require(std::isfinite(gamma_intermediate) && gamma_intermediate >= 0.0, "gamma_intermediate",
            "must be >= 0");
}

void PulseProfile::validate() const {
    require(std::isfinite(amp), "amp", "must be finite");
    require(std::isfinite(mod_freq_cycles), "mod_freq_cycles", "must be finite");
    require(std::isfinite(phase0), "phase0", "must be finite");
    require(std::isfinite(detuning_slope), "detuning_slope", "must be finite");
    require(std::isfinite(duration) && duration > 0.0, "duration", "must be finite and > 0");
    require(std::isfinite(local_phase), "local_phase", "must be finite");
}

PulseProfile default_profile(const BlockadeModel& model) {
    // Dimensionless optimum (slope in units of Omega, duration in 1/Omega).
    PulseProfile p;
    p.amp = 0.70579644498669258;
    p.mod_freq_cycles = 1.2673029858111167;
    p.phase0 = 2.3018355592734165;
    p.detuning_slope = -0.00058669781077380059 * model.omega;
    p.duration = 7.643126002608545 / model.omega;
    p.local_phase = -2.0982662706690354;
    return p;
}

double phase_at(double t, const PulseProfile& p) {
    if (!(t >= 0.0 && t <= p.duration)) throw std::out_of_range("phase_at: t outside the pulse window");
    return phase_unchecked(t, p);
}

OperatorMatrix build_hamiltonian(const BlockadeModel& model, double phi) {
    model.validate();
    OperatorMatrix h(model.perfect_blockade() ? 7 : 8);
    fill_symmetric(model, phi, 0.0, 1.0, h);
    return h;
}

OperatorMatrix build_product_hamiltonian(const BlockadeModel& model, double phi,
                                         const AtomPerturbation& pert) {
    model.validate();
    OperatorMatrix h(kProductDim);
    fill_product(model, phi, pert, h);
    return h;
}

namespace {

// e^{i phi} sampled on the half-step grid of a fixed-step RK4 run.
class PhaseTable {
  public:
    PhaseTable(const PulseProfile& p, std::size_t steps)
        : half_(0.5 * p.duration / static_cast<double>(steps)), values_(2 * steps + 1) {
        for (std::size_t k = 0; k < values_.size(); ++k)
            values_[k] = std::polar(1.0, phase_unchecked(static_cast<double>(k) * half_, p));
    }
    Complex at(double t) const {
        const auto k = static_cast<std::size_t>(std::lround(std::max(t, 0.0) / half_));
        return values_[std::min(k, values_.size() - 1)];
    }

  private:
    double half_;
    std::vector<Complex> values_;
};

// One block of the product-basis Hamiltonian that holds a single
// computational input: the listed product indices plus couplings.
struct Block {
    std::vector<std::size_t> rows;  // product indices, rows[0] is the input
    struct Coupling {
        std::size_t to, from;  // positions within rows
        double amplitude;      // |matrix element| before the phase factor
    };
    std::vector<Coupling> couplings;
    std::vector<double> diagonal;
};

Block make_block(std::size_t input, const BlockadeModel& model, const AtomPerturbation& pert) {
    constexpr std::size_t kOne = 1, kRyd = 2;
    const double ha = 0.5 * model.omega * pert.omega_scale[0];
    const double hb = 0.5 * model.omega * pert.omega_scale[1];
    Block b;
    switch (input) {
        case 1:  // |01> <-> |0r>
            b.rows = {product_index(0, kOne), product_index(0, kRyd)};
            b.couplings = {{1, 0, hb}};
            b.diagonal = {0.0, pert.detuning[1]};
            break;
        case 2:  // |10> <-> |r0>
            b.rows = {product_index(kOne, 0), product_index(kRyd, 0)};
            b.couplings = {{1, 0, ha}};
            b.diagonal = {0.0, pert.detuning[0]};
            break;
        default:  // |11> <-> |1r>, |r1> (<-> |rr>)
            b.rows = {product_index(kOne, kOne), product_index(kOne, kRyd), product_index(kRyd, kOne)};
            b.couplings = {{1, 0, hb}, {2, 0, ha}};
            b.diagonal = {0.0, pert.detuning[1], pert.detuning[0]};
            if (!model.perfect_blockade()) {
                b.rows.push_back(product_index(kRyd, kRyd));
                b.couplings.push_back({3, 1, ha});
                b.couplings.push_back({3, 2, hb});
                b.diagonal.push_back(model.blockade_v + pert.detuning[0] + pert.detuning[1]);
            }
            break;
    }
    return b;
}

}  // namespace

GateResult simulate_gate(const PulseProfile& p, const BlockadeModel& model,
                         const std::optional<AtomPerturbation>& pert, const SimulationOptions& opts) {
    p.validate();
    model.validate();
    if (!(opts.steps_per_period > 0.0)) throw std::invalid_argument("steps_per_period must be > 0");

    const double dt_max = kTwoPi / max_drive(model, pert) / opts.steps_per_period;
    const double n_steps = std::ceil(p.duration / dt_max);
    if (!(n_steps <= static_cast<double>(kMaxSteps)))
        throw std::invalid_argument("blockade_v: too large to integrate explicitly, use the perfect-blockade model");
    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(n_steps));
    const qdyn::StepControl ctl{0.0, p.duration, p.duration / static_cast<double>(steps)};
    const PhaseTable phases(p, steps);

    GateResult res;
    res.propagator[0][product_index(0, 0)] = 1.0;

    if (!pert || pert->symmetric()) {
        const std::size_t dim = model.perfect_blockade() ? 7 : 8;
        const double det = pert ? pert->detuning[0] : 0.0;
        const double scale = pert ? pert->omega_scale[0] : 1.0;
        std::vector<qdyn::StateVector> inputs;
        for (std::size_t c = 1; c < 4; ++c) inputs.push_back(qdyn::StateVector::basis(dim, kSymComp[c]));
        auto hfn = [&](double t, OperatorMatrix& h) {
            fill_symmetric(model, std::arg(phases.at(t)), det, scale, h);
        };
        std::vector<double> prev(3, 0.0);
        double t_prev = 0.0;
        qdyn::StepObserver obs;
        if (opts.track_rydberg_time) {
            obs = [&](double t, std::span<const qdyn::StateVector> states) {
                for (std::size_t c = 0; c < states.size(); ++c) {
                    double n = 0.0;
                    for (std::size_t i = k0r; i < dim; ++i) n += rydberg_count_symmetric(i) * std::norm(states[c][i]);
                    res.rydberg_time[c + 1] += 0.5 * (prev[c] + n) * (t - t_prev);
                    prev[c] = n;
                }
                t_prev = t;
            };
        }
        const auto outputs = qdyn::evolve_many(inputs, hfn, ctl, obs);
        for (std::size_t c = 1; c < 4; ++c) res.propagator[c] = to_product(outputs[c - 1]);
    } else {
        for (std::size_t c = 1; c < 4; ++c) {
            const Block blk = make_block(c, model, *pert);
            const std::size_t dim = blk.rows.size();
            auto hfn = [&](double t, OperatorMatrix& h) {
                const Complex e = phases.at(t);
                for (const auto& cp : blk.couplings) {
                    h(cp.to, cp.from) = cp.amplitude * e;
                    h(cp.from, cp.to) = cp.amplitude * std::conj(e);
                }
                for (std::size_t i = 0; i < dim; ++i) h(i, i) = blk.diagonal[i];
            };
            double prev = 0.0, t_prev = 0.0;
            qdyn::StepObserver obs;
            if (opts.track_rydberg_time) {
                obs = [&](double t, std::span<const qdyn::StateVector> states) {
                    double n = 0.0;
                    for (std::size_t i = 0; i < dim; ++i) n += rydberg_count_product(blk.rows[i]) * std::norm(states[0][i]);
                    res.rydberg_time[c] += 0.5 * (prev + n) * (t - t_prev);
                    prev = n;
                    t_prev = t;
                };
            }
            const qdyn::StateVector in = qdyn::StateVector::basis(dim, 0);
            const auto out = qdyn::evolve_many(std::span<const qdyn::StateVector>(&in, 1), hfn, ctl, obs);
            for (std::size_t i = 0; i < dim; ++i) res.propagator[c][blk.rows[i]] = out[0][i];
        }
    }

    // Local Z correction: e^{i theta} per atom in |1>.
    for (auto& col : res.propagator) {
        for (std::size_t i = 0; i < kProductDim; ++i) {
            const int ones = ones_count_product(i);
            if (ones > 0) col[i] *= std::polar(1.0, ones * p.local_phase);
            if (!std::isfinite(col[i].real()) || !std::isfinite(col[i].imag()))
                throw std::runtime_error("simulate_gate: integration produced a non-finite state");
        }
    }
    for (std::size_t c = 0; c < 4; ++c) {
        double kept = 0.0;
        for (std::size_t r = 0; r < 4; ++r) {
            res.unitary_on_comp[r][c] = res.propagator[c][kComputationalRows[r]];
            kept += std::norm(res.unitary_on_comp[r][c]);
        }
        res.leakage[c] = std::clamp(1.0 - kept, 0.0, 1.0);
    }
    res.leakage[0] = 0.0;
    res.fidelity = gate_fidelity(res.unitary_on_comp, false);
    return res;
}

// ------------------------------------------------------------------ fidelity

namespace {

double trace_overlap_sq(const Matrix4& u, double theta) {
    const Complex e1 = std::polar(1.0, -theta);
    const Complex e2 = std::polar(1.0, -2.0 * theta);
    const Complex tr = u[0][0] + e1 * (u[1][1] + u[2][2]) - e2 * u[3][3];
    return std::norm(tr);
}

}  // namespace

FidelityDetail gate_fidelity_detail(const Matrix4& u, bool maximize_local_phase) {
    double frob = 0.0;
    for (const auto& row : u)
        for (const auto& z : row) frob += std::norm(z);

    double theta = 0.0;
    if (maximize_local_phase) {
        constexpr int kScan = 720;
        const double step = kTwoPi / kScan;
        int best = 0;
        double best_val = -1.0;
        for (int k = 0; k < kScan; ++k) {
            const double v = trace_overlap_sq(u, k * step);
            if (v > best_val) {
                best_val = v;
                best = k;
            }
        }
        // golden-section refinement inside the bracketing scan cell pair
        double lo = (best - 1) * step, hi = (best + 1) * step;
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        double f1 = trace_overlap_sq(u, x1), f2 = trace_overlap_sq(u, x2);
        while (hi - lo > 1e-10) {
            if (f1 < f2) {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = trace_overlap_sq(u, x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = trace_overlap_sq(u, x1);
            }
        }
        theta = std::remainder(0.5 * (lo + hi), kTwoPi);
    }
    const double f = (frob + trace_overlap_sq(u, theta)) / 20.0;
    return {std::clamp(f, 0.0, 1.0), theta};
}

double gate_fidelity(const Matrix4& u, bool maximize_local_phase) {
    return gate_fidelity_detail(u, maximize_local_phase).fidelity;
}

// ----------------------------------------------------------------- optimizer

namespace {

constexpr std::size_t kParams = 5;
using Point = std::array<double, kParams>;

Point to_point(const PulseProfile& p, double omega) {
    return {p.amp, p.mod_freq_cycles, p.phase0, p.detuning_slope / omega, p.duration * omega};
}

PulseProfile from_point(const Point& x, double omega) {
    PulseProfile p;
    p.amp = x[0];
    p.mod_freq_cycles = x[1];
    p.phase0 = x[2];
    p.detuning_slope = x[3] * omega;
    p.duration = x[4] / omega;
    return p;
}

}  // namespace

OptimizeResult optimize_pulse(const BlockadeModel& model_in, const PulseProfile& initial,
                              const OptimizeOptions& opts) {
    initial.validate();
    BlockadeModel model = model_in;
    model.gamma_rydberg = 0.0;
    model.gamma_intermediate = 0.0;
    model.validate();
    const double omega = model.omega;

    OptimizeResult out;
    SimulationOptions sim = opts.sim;
    sim.track_rydberg_time = false;

    double best_obj = std::numeric_limits<double>::infinity();
    Point best_x{};
    double best_theta = 0.0;

    auto objective = [&](const Point& x) {
        if (out.evaluations >= opts.budget) return std::numeric_limits<double>::infinity();
        double obj = 1.0;
        double theta = 0.0;
        if (x[4] > 0.0 && std::isfinite(x[4])) {
            PulseProfile p = from_point(x, omega);
            const auto g = simulate_gate(p, model, std::nullopt, sim);
            const auto fd = gate_fidelity_detail(g.unitary_on_comp, true);
            obj = 1.0 - fd.fidelity;
            theta = fd.theta;
        }
        ++out.evaluations;
        if (obj < best_obj) {
            best_obj = obj;
            best_x = x;
            best_theta = theta;
        }
        if (!out.evaluations_to_target && 1.0 - best_obj >= opts.target_fidelity)
            out.evaluations_to_target = out.evaluations;
        out.log.push_back({out.evaluations, obj, best_obj});
        return obj;
    };

    // Deterministic initial simplex.
    const Point steps{0.05, 0.02, 0.05, 0.02, 0.05};
    std::array<Point, kParams + 1> simplex;
    std::array<double, kParams + 1> fval;
    simplex[0] = to_point(initial, omega);
    for (std::size_t i = 0; i < kParams; ++i) {
        simplex[i + 1] = simplex[0];
        simplex[i + 1][i] += steps[i];
    }
    for (std::size_t i = 0; i <= kParams; ++i) fval[i] = objective(simplex[i]);

    constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
    while (out.evaluations < opts.budget) {
        std::array<std::size_t, kParams + 1> order;
        for (std::size_t i = 0; i <= kParams; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fval[a] < fval[b]; });
        {
            auto s = simplex;
            auto f = fval;
            for (std::size_t i = 0; i <= kParams; ++i) {
                simplex[i] = s[order[i]];
                fval[i] = f[order[i]];
            }
        }
        double size = 0.0;
        for (std::size_t i = 1; i <= kParams; ++i)
            for (std::size_t k = 0; k < kParams; ++k) size = std::max(size, std::abs(simplex[i][k] - simplex[0][k]));
        if (fval[kParams] - fval[0] < 1e-13 && size < 1e-9) break;

        Point centroid{};
        for (std::size_t i = 0; i < kParams; ++i)
            for (std::size_t k = 0; k < kParams; ++k) centroid[k] += simplex[i][k] / kParams;
        auto along = [&](double coef) {
            Point x;
            for (std::size_t k = 0; k < kParams; ++k) x[k] = centroid[k] + coef * (simplex[kParams][k] - centroid[k]);
            return x;
        };

        const Point xr = along(-kReflect);
        const double fr = objective(xr);
        if (fr < fval[0]) {
            const Point xe = along(-kExpand);
            const double fe = objective(xe);
            if (fe < fr) {
                simplex[kParams] = xe;
                fval[kParams] = fe;
            } else {
                simplex[kParams] = xr;
                fval[kParams] = fr;
            }
        } else if (fr < fval[kParams - 1]) {
            simplex[kParams] = xr;
            fval[kParams] = fr;
        } else {
            const bool outside = fr < fval[kParams];
            const Point xc = along(outside ? -kContract : kContract);
            const double fc = objective(xc);
            if (fc < std::min(fr, fval[kParams])) {
                simplex[kParams] = xc;
                fval[kParams] = fc;
            } else {
                for (std::size_t i = 1; i <= kParams; ++i) {
                    for (std::size_t k = 0; k < kParams; ++k)
                        simplex[i][k] = simplex[0][k] + kShrink * (simplex[i][k] - simplex[0][k]);
                    fval[i] = objective(simplex[i]);
                }
            }
        }
    }

    out.profile = from_point(best_x, omega);
    // CZ(theta) matched means the correction must rotate by -theta.
    out.profile.local_phase = -best_theta;
    out.fidelity = 1.0 - best_obj;
    out.converged = out.fidelity >= 0.999;
    return out;
}

std::vector<std::pair<double, double>> rabi_scan(const BlockadeModel& model,
                                                 const std::vector<double>& durations) {
    model.validate();
    OperatorMatrix h(2);
    h(0, 1) = 0.5 * model.omega;
    h(1, 0) = 0.5 * model.omega;
    const auto hfn = qdyn::constant_hamiltonian(h);
    const double dt = kTwoPi / model.omega / 2000.0;
    std::vector<std::pair<double, double>> out;
    out.reserve(durations.size());
    const qdyn::StateVector one = qdyn::StateVector::basis(2, 0);
    for (double t : durations) {
        if (!(t >= 0.0)) throw std::invalid_argument("rabi_scan: durations must be >= 0");
        const auto s = qdyn::evolve(one, hfn, 0.0, t, dt);
        out.emplace_back(t, std::norm(s[1]));
    }
    return out;
}

DecayEstimate estimate_decay(const GateResult& gate, const PulseProfile& p, const BlockadeModel& model) {
    double ryd = 0.0;
    for (double t : gate.rydberg_time) ryd += t;
    // average over inputs, per atom
    ryd /= 4.0 * 2.0;
    DecayEstimate d;
    d.loss_prob = model.gamma_rydberg * model.bbr_fraction * ryd;
    d.recycle_prob = model.gamma_rydberg * (1.0 - model.bbr_fraction) * ryd;
    if (model.delta_int != 0.0)
        d.scatter_prob = model.gamma_intermediate * model.omega / (2.0 * std::abs(model.delta_int)) *
                         (0.5 * p.duration);
    return d;
}

}  // namespace rydberg::czgate
