#include "rydberg/qdyn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rydberg::qdyn {

namespace {

void check_dim(std::size_t dim) {
    if (dim == 0 || dim > kMaxDim)
        throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) +
                                    "], got " + std::to_string(dim));
}

std::size_t step_count(double t0, double t1, double dt) {
    if (!(t1 >= t0)) throw std::invalid_argument("evolve: t1 must be >= t0");
    if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
    const double span = t1 - t0;
    if (span == 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
}

// y = -i H x
inline void apply_minus_i(const OperatorMatrix& h, const Complex* x, Complex* y) {
    const std::size_t n = h.dim();
    const Complex* e = h.entries().data();
    for (std::size_t r = 0; r < n; ++r) {
        Complex acc{0.0, 0.0};
        const Complex* row = e + r * n;
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
        y[r] = Complex{acc.imag(), -acc.real()};
    }
}

void eval_hamiltonian(const HamiltonianFn& fn, double t, OperatorMatrix& h) {
    h.set_zero();
    fn(t, h);
    if (!h.all_finite())
        throw std::domain_error("Hamiltonian has a non-finite entry at t = " + std::to_string(t));
}

// Workspace for RK4 over a block of column vectors.
class Rk4 {
  public:
    Rk4(std::size_t dim, std::size_t cols)
        : dim_(dim), cols_(cols), h0_(dim), hm_(dim), h1_(dim), k1_(dim * cols), k2_(dim * cols),
          k3_(dim * cols), k4_(dim * cols), tmp_(dim * cols) {}

    // `extra` (may be null) is added to every Hamiltonian evaluation.
    void step(const HamiltonianFn& fn, const OperatorMatrix* extra, double t, double h,
              std::vector<Complex>& psi) {
        eval(fn, extra, t, h0_);
        eval(fn, extra, t + 0.5 * h, hm_);
        eval(fn, extra, t + h, h1_);
        stage(h0_, psi.data(), k1_.data());
        axpy(psi, 0.5 * h, k1_);
        stage(hm_, tmp_.data(), k2_.data());
        axpy(psi, 0.5 * h, k2_);
        stage(hm_, tmp_.data(), k3_.data());
        axpy(psi, h, k3_);
        stage(h1_, tmp_.data(), k4_.data());
        const double w = h / 6.0;
        for (std::size_t i = 0; i < psi.size(); ++i)
            psi[i] += w * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }

  private:
    void eval(const HamiltonianFn& fn, const OperatorMatrix* extra, double t, OperatorMatrix& out) {
        eval_hamiltonian(fn, t, out);
        if (extra != nullptr) out = out + *extra;
    }
    void stage(const OperatorMatrix& hm, const Complex* x, Complex* y) const {
        for (std::size_t c = 0; c < cols_; ++c) apply_minus_i(hm, x + c * dim_, y + c * dim_);
    }
    void axpy(const std::vector<Complex>& psi, double a, const std::vector<Complex>& k) {
        for (std::size_t i = 0; i < psi.size(); ++i) tmp_[i] = psi[i] + a * k[i];
    }

    std::size_t dim_, cols_;
    OperatorMatrix h0_, hm_, h1_;
    std::vector<Complex> k1_, k2_, k3_, k4_, tmp_;
};

void normalize_column(Complex* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::norm(x[i]);
    if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("state norm collapsed or diverged");
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
}

}  // namespace

// ---------------------------------------------------------------- StateVector

StateVector::StateVector(std::size_t dim) : amps_(dim) {
    check_dim(dim);
    amps_[0] = 1.0;
}

StateVector::StateVector(std::vector<Complex> amplitudes) : amps_(std::move(amplitudes)) {
    check_dim(amps_.size());
}

StateVector::StateVector(std::initializer_list<Complex> amplitudes) : amps_(amplitudes) {
    check_dim(amps_.size());
}

StateVector StateVector::basis(std::size_t dim, std::size_t index) {
    if (index >= dim) throw std::out_of_range("basis index out of range");
    std::vector<Complex> a(dim);
    a[index] = 1.0;
    return StateVector(std::move(a));
}

double StateVector::norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
}

void StateVector::normalize() { normalize_column(amps_.data(), amps_.size()); }

// ------------------------------------------------------------- OperatorMatrix

OperatorMatrix::OperatorMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim) {
    if (dim > kMaxDim) check_dim(dim);
}

OperatorMatrix OperatorMatrix::identity(std::size_t dim) {
    OperatorMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
}

OperatorMatrix OperatorMatrix::projector(std::size_t dim, std::span<const std::size_t> indices) {
    OperatorMatrix m(dim);
    for (auto i : indices) {
        if (i >= dim) throw std::out_of_range("projector index out of range");
        m(i, i) = 1.0;
    }
    return m;
}

OperatorMatrix OperatorMatrix::projector(std::size_t dim, std::initializer_list<std::size_t> indices) {
    return projector(dim, std::span<const std::size_t>(indices.begin(), indices.size()));
}

OperatorMatrix OperatorMatrix::outer(const StateVector& ket, const StateVector& bra) {
    if (ket.dim() != bra.dim()) throw std::invalid_argument("outer: dimension mismatch");
    OperatorMatrix m(ket.dim());
    for (std::size_t r = 0; r < ket.dim(); ++r)
        for (std::size_t c = 0; c < bra.dim(); ++c) m(r, c) = ket[r] * std::conj(bra[c]);
    return m;
}

void OperatorMatrix::set_zero() { std::fill(entries_.begin(), entries_.end(), Complex{}); }

bool OperatorMatrix::is_hermitian(double tol) const {
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = r; c < dim_; ++c)
            if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
    return true;
}

bool OperatorMatrix::all_finite() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Complex& z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

double OperatorMatrix::max_abs() const {
    double m = 0.0;
    for (const auto& z : entries_) m = std::max(m, std::abs(z));
    return m;
}

OperatorMatrix OperatorMatrix::adjoint() const {
    OperatorMatrix m(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
        for (std::size_t c = 0; c < dim_; ++c) m(c, r) = std::conj((*this)(r, c));
    return m;
}

StateVector OperatorMatrix::apply(const StateVector& v) const {
    if (v.dim() != dim_) throw std::invalid_argument("apply: dimension mismatch");
    std::vector<Complex> out(dim_);
    for (std::size_t r = 0; r < dim_; ++r) {
        Complex acc{};
        for (std::size_t c = 0; c < dim_; ++c) acc += (*this)(r, c) * v[c];
        out[r] = acc;
    }
    return StateVector(std::move(out));
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("matrix product: dimension mismatch");
    OperatorMatrix m(a.dim_);
    for (std::size_t r = 0; r < a.dim_; ++r)
        for (std::size_t k = 0; k < a.dim_; ++k) {
            const Complex x = a(r, k);
            if (x == Complex{}) continue;
            for (std::size_t c = 0; c < a.dim_; ++c) m(r, c) += x * b(k, c);
        }
    return m;
}

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("matrix sum: dimension mismatch");
    OperatorMatrix m(a.dim_);
    for (std::size_t i = 0; i < m.entries_.size(); ++i) m.entries_[i] = a.entries_[i] + b.entries_[i];
    return m;
}

OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    return a + Complex{-1.0, 0.0} * b;
}

OperatorMatrix operator*(Complex s, const OperatorMatrix& a) {
    OperatorMatrix m(a.dim_);
    for (std::size_t i = 0; i < m.entries_.size(); ++i) m.entries_[i] = s * a.entries_[i];
    return m;
}

OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b) {
    const std::size_t na = a.dim(), nb = b.dim();
    OperatorMatrix m(na * nb);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < na; ++j)
            for (std::size_t k = 0; k < nb; ++k)
                for (std::size_t l = 0; l < nb; ++l) m(i * nb + k, j * nb + l) = a(i, j) * b(k, l);
    return m;
}

HamiltonianFn constant_hamiltonian(OperatorMatrix h) {
    return [h = std::move(h)](double, OperatorMatrix& out) {
        if (out.dim() != h.dim()) throw std::invalid_argument("Hamiltonian dimension mismatch");
        out = h;
    };
}

// ------------------------------------------------------------------ evolution

std::vector<StateVector> evolve_many(std::span<const StateVector> states,
                                     const HamiltonianFn& hamiltonian, const StepControl& ctl,
                                     const StepObserver& observer) {
    if (states.empty()) return {};
    const std::size_t dim = states.front().dim();
    for (const auto& s : states)
        if (s.dim() != dim) throw std::invalid_argument("evolve: states have different dimensions");

    const std::size_t n = step_count(ctl.t0, ctl.t1, ctl.max_dt);
    const std::size_t cols = states.size();
    std::vector<Complex> psi(dim * cols);
    for (std::size_t c = 0; c < cols; ++c)
        std::copy(states[c].amplitudes().begin(), states[c].amplitudes().end(), psi.begin() + c * dim);

    if (n > 0) {
        // Probe once so a wrong-sized provider fails before any stepping.
        OperatorMatrix probe(dim);
        eval_hamiltonian(hamiltonian, ctl.t0, probe);
        if (probe.dim() != dim) throw std::invalid_argument("evolve: Hamiltonian dimension mismatch");
    }

    Rk4 rk(dim, cols);
    const double h = n > 0 ? (ctl.t1 - ctl.t0) / static_cast<double>(n) : 0.0;
    std::vector<StateVector> out;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = ctl.t0 + static_cast<double>(k) * h;
        rk.step(hamiltonian, nullptr, t, h, psi);
        for (std::size_t c = 0; c < cols; ++c) normalize_column(psi.data() + c * dim, dim);
        if (observer) {
            out.clear();
            for (std::size_t c = 0; c < cols; ++c)
                out.emplace_back(std::vector<Complex>(psi.begin() + c * dim, psi.begin() + (c + 1) * dim));
            observer(t + h, out);
        }
    }
    out.clear();
    for (std::size_t c = 0; c < cols; ++c)
        out.emplace_back(std::vector<Complex>(psi.begin() + c * dim, psi.begin() + (c + 1) * dim));
    return out;
}

StateVector evolve(const StateVector& state, const HamiltonianFn& hamiltonian, double t0, double t1,
                   double dt) {
    auto out = evolve_many(std::span<const StateVector>(&state, 1), hamiltonian, {t0, t1, dt});
    return std::move(out.front());
}

Trajectory trajectory_evolve(const StateVector& state, const HamiltonianFn& hamiltonian,
                             std::span<const JumpChannel> channels, double t0, double t1, double dt,
                             Rng& rng) {
    const std::size_t dim = state.dim();
    double total_rate = 0.0;
    for (const auto& ch : channels) {
        if (!(ch.rate >= 0.0) || !std::isfinite(ch.rate))
            throw std::invalid_argument("jump channel rate must be finite and >= 0");
        if (ch.source_projector.dim() != dim ||
            (ch.jump_operator.dim() != 0 && ch.jump_operator.dim() != dim))
            throw std::invalid_argument("jump channel dimension mismatch");
        total_rate += ch.rate;
    }

    std::size_t n = step_count(t0, t1, dt);
    if (n > 0 && total_rate > 0.0) {
        const auto needed = static_cast<std::size_t>(std::ceil((t1 - t0) * total_rate / 1e-3));
        n = std::max(n, needed);
    }

    // H_eff = H - (i/2) sum rate P
    OperatorMatrix damping(dim);
    bool damped = false;
    for (const auto& ch : channels) {
        if (ch.rate == 0.0) continue;
        damping = damping + Complex{0.0, -0.5 * ch.rate} * ch.source_projector;
        damped = true;
    }

    if (n > 0) {
        OperatorMatrix probe(dim);
        eval_hamiltonian(hamiltonian, t0, probe);
    }

    Trajectory traj{state, {}, false};
    std::vector<Complex> psi(state.amplitudes().begin(), state.amplitudes().end());
    Rk4 rk(dim, 1);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double h = n > 0 ? (t1 - t0) / static_cast<double>(n) : 0.0;

    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) * h;
        if (damped) {
            StateVector cur(psi);
            std::vector<double> weights(channels.size(), 0.0);
            double p_jump = 0.0;
            for (std::size_t c = 0; c < channels.size(); ++c) {
                if (channels[c].rate == 0.0) continue;
                weights[c] = channels[c].rate * expectation(cur, channels[c].source_projector) * h;
                p_jump += weights[c];
            }
            const double u = uniform(rng);
            if (u < p_jump) {
                double acc = 0.0;
                std::size_t which = 0;
                for (std::size_t c = 0; c < channels.size(); ++c) {
                    acc += weights[c];
                    which = c;
                    if (u < acc) break;
                }
                const auto& ch = channels[which];
                const OperatorMatrix& op = ch.jump_operator.dim() == 0 ? ch.source_projector : ch.jump_operator;
                StateVector next = op.apply(cur);
                next.normalize();
                psi.assign(next.amplitudes().begin(), next.amplitudes().end());
                traj.events.push_back({t, ch.target});
                if (ch.target == JumpTarget::LossFromRydberg) {
                    traj.lost = true;
                    traj.state = StateVector(psi);
                    return traj;
                }
            }
        }
        rk.step(hamiltonian, damped ? &damping : nullptr, t, h, psi);
        normalize_column(psi.data(), dim);
    }
    traj.state = StateVector(std::move(psi));
    return traj;
}

double expectation(const StateVector& state, const OperatorMatrix& projector) {
    if (state.dim() != projector.dim()) throw std::invalid_argument("expectation: dimension mismatch");
    const OperatorMatrix sq = projector * projector;
    for (std::size_t i = 0; i < sq.entries().size(); ++i)
        if (std::abs(sq.entries()[i] - projector.entries()[i]) > 1e-12)
            throw std::invalid_argument("expectation: operator is not a projector");
    const StateVector pv = projector.apply(state);
    Complex acc{};
    for (std::size_t i = 0; i < state.dim(); ++i) acc += std::conj(state[i]) * pv[i];
    return std::clamp(acc.real(), 0.0, 1.0);
}

}  // namespace rydberg::qdyn
