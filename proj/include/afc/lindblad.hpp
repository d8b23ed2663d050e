#pragma once

#include <cstdint>
#include <vector>

#include "afc/common.hpp"

namespace afc::lindblad {

// Basis order of the 6-level ion: ground levels 0..2 then excited levels 3..5.
using Mat6 = Eigen::Matrix<Complex, 6, 6>;
using Vec36 = Eigen::Matrix<Complex, 36, 1>;
// Superoperator on column-stacked sigma: vec(sigma)[k + 6 l] = sigma(k, l).
using Super = Eigen::Matrix<Complex, 36, 36>;
// The same map in the orthonormal Hermitian basis (diagonal units, then
// symmetric and antisymmetric pairs), where CPTP maps are real.
using RealSuper = Eigen::Matrix<double, 36, 36>;
using RealVec36 = Eigen::Matrix<double, 36, 1>;

/// Spontaneous emission |e_j> -> |g_i> at rate branching(i, j) / lifetime.
struct RelaxationModel {
    double excited_lifetime_us = 164.0;
    Eigen::Matrix3d branching = Eigen::Matrix3d::Identity(); // (ground i, excited j)
    double dephasing_rate = 0.0; // optional pure optical dephasing, 1/us

    void validate() const;
};

/// -i[H, .] + sum_k D[L_k]; H in angular units (rad/us).
Super build_generator(const Mat6& h, const RelaxationModel& relax);

Vec36 vectorize(const Mat6& sigma);
Mat6 unvectorize(const Vec36& v);

/// Coordinates of a Hermitian matrix in the real orthonormal basis; the
/// first six are the diagonal, so the trace is their sum.
RealVec36 to_coords(const Mat6& sigma);
Mat6 from_coords(const RealVec36& x);
RealSuper to_real(const Super& l);
Super to_complex(const RealSuper& r);

/// exp(M) by the nested Horner series 1 + M(1 + M/2(1 + ... (1 + M/terms))).
template <typename Derived>
typename Derived::PlainObject matrix_exp(const Eigen::MatrixBase<Derived>& m, int terms = 30)
{
    using Plain = typename Derived::PlainObject;
    const Plain identity = Plain::Identity(m.rows(), m.cols());
    Plain result = identity + m / static_cast<double>(terms);
    for (int k = terms - 1; k >= 1; --k) {
        result = identity + (m / static_cast<double>(k)) * result;
    }
    return result;
}

/// Smallest Horner order whose first dropped Taylor term is below `tolerance`
/// for a matrix of the given norm; capped at 30.
int horner_terms(double norm, double tolerance = 1e-18);

/// One period of complex drive envelope; a tone at detuning +nu is
/// exp(-2 pi i nu t). Rabi frequency is 2 pi * rabi_strength * |envelope|.
struct PeriodicDrive {
    std::vector<Complex> envelope;
    double period_us = 0.0;
    double rabi_strength = 0.0;
    double center_detuning_mhz = 0.0;

    void validate() const;
    /// Envelope at time t (periodic linear interpolation).
    Complex at(double t_us) const;
    /// Constant-amplitude tone at the drive center.
    static PeriodicDrive continuous_wave(double rabi_strength, double center_mhz, double period_us = 0.002);
};

/// Level structure of one ion class in the frame of its lowest transition.
struct IonModel {
    Eigen::Vector3d ground_mhz;  // hyperfine energies, ascending
    Eigen::Vector3d excited_mhz;
    Eigen::Matrix3d amplitudes;  // (ground i, excited j)
    RelaxationModel relax;

    /// Diagonal Hamiltonian (rad/us): transition a, the lowest one, sits at
    /// zero, the whole spectrum centered on zero.
    Mat6 frame_hamiltonian() const;
    /// sum_ij m_ij (c |e_j><g_i| + conj(c) |g_i><e_j|).
    Mat6 coupling(Complex c) const;
};

struct PropagatorOptions {
    double dt_target_us = 1e-3;
    int horner_terms = 0; // 0: adaptive, smallest order below 1e-18
};

struct PeriodPropagator {
    RealSuper p;          // ordered product over one period, in the real basis
    RealSuper frame;      // period-to-period drive-phase rotation W
    double dt_us = 0.0;
    int steps = 0;

    /// W^-1 P: its powers give the populations after n periods.
    RealSuper corrected() const { return frame.transpose() * p; }
};

/// Per-step generators L_k = L0 + Re(c_k) A + Im(c_k) B, exponentiated and
/// multiplied in time order for one drive period, for an ion whose lowest
/// transition lies `detuning_mhz` above the laser reference.
class PropagatorEngine {
public:
    PropagatorEngine(const IonModel& ion, const PeriodicDrive& drive, const PropagatorOptions& options = {});

    PeriodPropagator period_propagator(double detuning_mhz) const;
    double dt_us() const { return dt_; }
    int steps() const { return steps_; }
    const RealSuper& drift() const { return l0_; }

private:
    RealSuper l0_;
    RealSuper a_;
    RealSuper b_;
    std::vector<Complex> samples_; // 2 pi * Omega0 / 2 * s(t_k)
    double dt_ = 0.0;
    int steps_ = 0;
    int terms_ = 30;
    double period_ = 0.0;
    double center_ = 0.0;
};

struct PowerStats {
    int squarings = 0;
    int multiplications = 0;
};

/// P^n by binary exponentiation; n = 0 gives the identity.
RealSuper power_propagator(const RealSuper& p, std::uint64_t n, PowerStats* stats = nullptr);
Super power_propagator(const Super& p, std::uint64_t n, PowerStats* stats = nullptr);

/// Drive-free evolution for `duration_us` (steps of `dt_us`, log-doubled).
RealSuper free_evolution(const IonModel& ion, double duration_us, double dt_us = 1e-3);

/// Smallest eigenvalue of the Choi matrix of a superoperator.
double choi_min_eigenvalue(const Super& map);

struct StateCheck {
    double trace_error = 0.0;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
};

StateCheck check_state(const Mat6& sigma);

} // namespace afc::lindblad
