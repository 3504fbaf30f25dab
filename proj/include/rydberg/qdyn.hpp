#pragma once

// Small dense complex linear algebra and time evolution for few-level
// systems (dimension <= 16), plus Monte-Carlo quantum-trajectory sampling.

#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace rydberg::qdyn {

using Complex = std::complex<double>;
using Rng = std::mt19937_64;

inline constexpr std::size_t kMaxDim = 16;

class StateVector {
  public:
    // |0> of the given dimension.
    explicit StateVector(std::size_t dim);
    explicit StateVector(std::vector<Complex> amplitudes);
    StateVector(std::initializer_list<Complex> amplitudes);

    static StateVector basis(std::size_t dim, std::size_t index);

    std::size_t dim() const { return amps_.size(); }
    std::span<const Complex> amplitudes() const { return amps_; }
    std::span<Complex> amplitudes() { return amps_; }

    Complex operator[](std::size_t i) const { return amps_[i]; }
    Complex& operator[](std::size_t i) { return amps_[i]; }

    double norm() const;
    void normalize();

  private:
    std::vector<Complex> amps_;
};

// Row-major dim x dim complex matrix.
class OperatorMatrix {
  public:
    explicit OperatorMatrix(std::size_t dim);

    static OperatorMatrix identity(std::size_t dim);
    // Projector onto the span of the listed computational basis states.
    static OperatorMatrix projector(std::size_t dim, std::initializer_list<std::size_t> indices);
    static OperatorMatrix projector(std::size_t dim, std::span<const std::size_t> indices);
    static OperatorMatrix outer(const StateVector& ket, const StateVector& bra);

    std::size_t dim() const { return dim_; }

    Complex operator()(std::size_t r, std::size_t c) const { return entries_[r * dim_ + c]; }
    Complex& operator()(std::size_t r, std::size_t c) { return entries_[r * dim_ + c]; }

    std::span<const Complex> entries() const { return entries_; }

    void set_zero();
    bool is_hermitian(double tol = 1e-12) const;
    bool all_finite() const;
    double max_abs() const;

    OperatorMatrix adjoint() const;
    StateVector apply(const StateVector& v) const;

    friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);
    friend OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);
    friend OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b);
    friend OperatorMatrix operator*(Complex s, const OperatorMatrix& a);

  private:
    std::size_t dim_;
    std::vector<Complex> entries_;
};

// Kronecker product, a (x) b.
OperatorMatrix kron(const OperatorMatrix& a, const OperatorMatrix& b);

// Fills `h` with H(t). `h` arrives sized to the state dimension and
// zeroed; providers may assume nothing else about its contents.
using HamiltonianFn = std::function<void(double t, OperatorMatrix& h)>;

HamiltonianFn constant_hamiltonian(OperatorMatrix h);

struct StepControl {
    double t0 = 0.0;
    double t1 = 0.0;
    double max_dt = 0.0;
};

// Called after every accepted step with the time reached and the current
// (normalized) states.
using StepObserver = std::function<void(double t, std::span<const StateVector> states)>;

// Fixed-step RK4 on i d|psi>/dt = H(t)|psi>, renormalizing after every step.
// The step is the largest h <= dt that divides [t0, t1] evenly.
StateVector evolve(const StateVector& state, const HamiltonianFn& hamiltonian, double t0,
                   double t1, double dt);

// Same integrator applied to several states that share one H(t); the
// Hamiltonian is evaluated once per stage for all of them.
std::vector<StateVector> evolve_many(std::span<const StateVector> states,
                                     const HamiltonianFn& hamiltonian, const StepControl& ctl,
                                     const StepObserver& observer = {});

enum class JumpTarget { LossFromRydberg, RecycleToGround };

struct JumpChannel {
    double rate = 0.0;  // 1/s
    JumpTarget target = JumpTarget::LossFromRydberg;
    OperatorMatrix source_projector{1};
    // Applied on a jump; the source projector is used when empty (dim 0).
    OperatorMatrix jump_operator{0};
};

struct JumpEvent {
    double time;
    JumpTarget target;
};

struct Trajectory {
    StateVector state;
    std::vector<JumpEvent> events;
    bool lost = false;
};

// First-order Monte-Carlo wavefunction method. Between jumps the state
// evolves under H - (i/2) sum_k rate_k P_k; a jump on channel k happens in
// a step with probability rate_k <psi|P_k|psi> h. A LossFromRydberg jump
// ends the trajectory. Steps are refined so that the total per-step jump
// probability bound stays below 1e-3.
Trajectory trajectory_evolve(const StateVector& state, const HamiltonianFn& hamiltonian,
                             std::span<const JumpChannel> channels, double t0, double t1,
                             double dt, Rng& rng);

// <psi|P|psi>, clamped to [0, 1]. P must be idempotent.
double expectation(const StateVector& state, const OperatorMatrix& projector);

}  // namespace rydberg::qdyn
