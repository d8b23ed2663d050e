#pragma once

#include <array>
#include <string>

#include "afc/common.hpp"

namespace afc::hyperfine {

using Mat6 = Eigen::Matrix<Complex, 6, 6>;

/// Angular momentum matrices for I = 5/2 in the |m> basis, m = 5/2 ... -5/2.
struct SpinOperators {
    Mat6 ix;
    Mat6 iy;
    Mat6 iz;
};

SpinOperators build_spin_operators();

/// Traceless symmetric quadrupole tensor in the manifold's principal frame.
///
/// Half the tensor is diag(E - D/3, -E - D/3, 2D/3) with 0 <= E/D <= 1/3; the
/// pair (D, E) is solved so that the three Kramers levels of 1/2 I.Q.I are
/// separated by `lower` then `upper` (ascending energy).
Eigen::Matrix3d quadrupole_from_spacings(double lower, double upper);

/// H = 1/2 sum_ab Q_ab I_a I_b. Rejects non-symmetric or non-traceless Q.
Mat6 build_hamiltonian(const Eigen::Matrix3d& q, const SpinOperators& ops);

/// Eigen-decomposition of a manifold Hamiltonian grouped into Kramers pairs.
struct KramersLevels {
    Eigen::Vector3d energies;        // ascending
    Mat6 vectors;                    // columns 2k, 2k+1 span pair k
    double max_pair_splitting = 0.0; // MHz
    double min_level_gap = 0.0;      // MHz
};

KramersLevels kramers_levels(const Mat6& h);

/// Level spacings (lower, upper) of a Hamiltonian, ascending in energy.
std::array<double, 2> level_spacings(const Mat6& h);

struct EulerAngles {
    double alpha = 0.0; // degrees
    double beta = 0.0;
    double gamma = 0.0;
    Eigen::Vector3d sigma = Eigen::Vector3d::Constant(0.0);

    Eigen::Vector3d vector() const { return {alpha, beta, gamma}; }
};

/// Rz(alpha) Ry(beta) Rz(gamma), angles in degrees.
Eigen::Matrix3d rotation_zyz(double alpha, double beta, double gamma);

/// Both ZYZ decompositions of a proper rotation, angles wrapped to (-180, 180].
std::array<Eigen::Vector3d, 2> zyz_angles(const Eigen::Matrix3d& r);

/// Wigner rotation exp(-i a Iz) exp(-i b Iy) exp(-i g Iz) acting on the spin.
Mat6 spin_rotation(const SpinOperators& ops, double alpha, double beta, double gamma);

/// How the relative orientation of the two manifolds becomes amplitudes.
///
/// PrincipalAxis treats each Kramers level as its principal axis of Q (1/2 ->
/// x, 3/2 -> y, 5/2 -> z) so m is the rotation matrix itself; this is the
/// model that reproduces the reference amplitude table. SpinOverlap collapses the
/// 2x2 blocks of the rotated spin-5/2 eigenvector overlaps, signed by the
/// largest-magnitude element of each block.
enum class AmplitudeModel { PrincipalAxis, SpinOverlap };

AmplitudeModel parse_amplitude_model(const std::string& name);
std::string to_string(AmplitudeModel model);

/// One optical manifold: tensor in its own principal frame plus Hamiltonian.
struct Manifold {
    Eigen::Matrix3d q;
    Mat6 h;
};

Manifold make_manifold(const std::array<double, 2>& spacings, const SpinOperators& ops);

/// Signed 3x3 amplitudes; rows are ground levels (1/2, 3/2, 5/2), columns
/// excited levels, with the excited manifold rotated by `rel` relative to the
/// ground frame.
Eigen::Matrix3d transition_amplitudes(const Manifold& ground,
                                      const Manifold& excited,
                                      const EulerAngles& rel,
                                      AmplitudeModel model,
                                      const SpinOperators& ops);

struct FitOptions {
    int starts = 64;
    unsigned long long seed = 20240607ULL;
    AmplitudeModel model = AmplitudeModel::PrincipalAxis;
    Eigen::Vector3d reference{10.3, -164.4, -130.7};
};

struct FitResult {
    EulerAngles angles;
    Eigen::Matrix3d amplitudes;
    double rms = 0.0; // RMS of m^2 - target over the 9 entries
    bool converged = false;
    int best_start = -1;
    std::string diagnostic;
};

/// Multi-start Levenberg-Marquardt fit of sum (m_ij^2 - target_ij)^2 over
/// the three relative Euler angles. Uncertainties are local-curvature
/// estimates sqrt(diag((J^T J)^-1) * SSR / (9 - 3)).
FitResult fit_euler_angles(const Eigen::Matrix3d& target,
                           const Manifold& ground,
                           const Manifold& excited,
                           const SpinOperators& ops,
                           const FitOptions& options = {});

/// Among all angle triples giving the same strengths (tensor point-group
/// images and the alternate ZYZ branch), the one closest to `reference`.
Eigen::Vector3d canonicalize_angles(const Eigen::Vector3d& angles,
                                    const Eigen::Vector3d& reference);

/// Nine transitions a..i in ascending frequency, as (ground, excited) level
/// indices with their frequency relative to the lowest one.
struct Transition {
    int ground = 0;
    int excited = 0;
    double offset_mhz = 0.0;
};

std::array<Transition, 9> transitions(const Eigen::Vector3d& ground_energies,
                                      const Eigen::Vector3d& excited_energies);

/// Level energies (ascending, lowest at 0) from two spacings.
Eigen::Vector3d energies_from_spacings(const std::array<double, 2>& spacings);

/// Rows: ion classes A..I (class X is resonant on transition x); columns:
/// transitions a..i; entry = detuning of that transition from the laser.
struct TransitionTable {
    Eigen::Matrix<double, 9, 9> detuning;
    std::array<Transition, 9> order;

    /// True when class and transition share the ground level (depleted by a
    /// burn at zero detuning, so a transmission peak rather than a dip).
    bool shares_ground(int cls, int transition) const
    {
        return order[cls].ground == order[transition].ground;
    }
};

TransitionTable transition_table(const std::array<double, 2>& ground_spacings,
                                 const std::array<double, 2>& excited_spacings);

} // namespace afc::hyperfine
