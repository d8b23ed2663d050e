#include <random>

#include "doctest.h"

#include "afc/hyperfine.hpp"

using namespace afc;
using namespace afc::hyperfine;

namespace {

const SpinOperators ops = build_spin_operators();

Eigen::Matrix3d random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized().toRotationMatrix();
}

Eigen::Vector3d random_angles(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-180.0, 180.0);
    return {u(rng), u(rng), u(rng)};
}

EulerAngles angles(const Eigen::Vector3d& v)
{
    EulerAngles a;
    a.alpha = v[0];
    a.beta = v[1];
    a.gamma = v[2];
    return a;
}

const Manifold ground = make_manifold({10.19, 17.30}, ops);
const Manifold excited = make_manifold({4.58, 4.84}, ops);

} // namespace

TEST_CASE("spin operators")
{
    const Complex i(0.0, 1.0);
    for (int k = 0; k < 6; ++k) {
        CHECK(ops.iz(k, k).real() == doctest::Approx(2.5 - k));
    }
    CHECK((ops.ix * ops.iy - ops.iy * ops.ix - i * ops.iz).norm() < 1e-12);
    CHECK((ops.iy * ops.iz - ops.iz * ops.iy - i * ops.ix).norm() < 1e-12);
    CHECK((ops.iz * ops.ix - ops.ix * ops.iz - i * ops.iy).norm() < 1e-12);
    for (const auto* m : {&ops.ix, &ops.iy, &ops.iz}) {
        CHECK((*m - m->adjoint()).norm() == 0.0);
    }
    const Mat6 casimir = ops.ix * ops.ix + ops.iy * ops.iy + ops.iz * ops.iz;
    CHECK((casimir - 8.75 * Mat6::Identity()).norm() < 1e-12);
}

TEST_CASE("hamiltonian spectrum")
{
    SUBCASE("zero tensor")
    {
        const Mat6 h = build_hamiltonian(Eigen::Matrix3d::Zero(), ops);
        CHECK(h.norm() == 0.0);
    }
    SUBCASE("configured spacings are reproduced")
    {
        for (const auto& s : {std::array<double, 2>{4.58, 4.84}, std::array<double, 2>{10.19, 17.30},
                              std::array<double, 2>{3.0, 6.0}, std::array<double, 2>{5.0, 5.0},
                              std::array<double, 2>{8.0, 4.5}}) {
            const Mat6 h = build_hamiltonian(quadrupole_from_spacings(s[0], s[1]), ops);
            const auto got = level_spacings(h);
            CHECK(got[0] == doctest::Approx(s[0]).epsilon(1e-12));
            CHECK(got[1] == doctest::Approx(s[1]).epsilon(1e-12));
            const auto levels = kramers_levels(h);
            CHECK(levels.max_pair_splitting < 1e-9);
        }
    }
    SUBCASE("tensor is traceless and symmetric")
    {
        const Eigen::Matrix3d q = quadrupole_from_spacings(10.19, 17.30);
        CHECK(std::abs(q.trace()) < 1e-12);
        CHECK(q == q.transpose());
    }
    SUBCASE("invalid tensors and spacings are rejected")
    {
        Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
        q(0, 1) = 1.0;
        CHECK_THROWS_AS(build_hamiltonian(q, ops), ConfigError);
        CHECK_THROWS_AS(build_hamiltonian(Eigen::Matrix3d::Identity(), ops), ConfigError);
        CHECK_THROWS_AS(quadrupole_from_spacings(1.0, 5.0), ConfigError);
        CHECK_THROWS_AS(quadrupole_from_spacings(-1.0, 5.0), ConfigError);
    }
}

TEST_CASE("property: spectrum is invariant under rotation of the tensor")
{
    std::mt19937_64 rng(1);
    const Eigen::Matrix3d q = quadrupole_from_spacings(10.19, 17.30);
    const auto reference = kramers_levels(build_hamiltonian(q, ops)).energies;
    for (int n = 0; n < 200; ++n) {
        const Eigen::Matrix3d r = random_rotation(rng);
        Eigen::Matrix3d rotated = r * q * r.transpose();
        rotated = 0.5 * (rotated + rotated.transpose()).eval();
        rotated(2, 2) = -(rotated(0, 0) + rotated(1, 1));
        const auto levels = kramers_levels(build_hamiltonian(rotated, ops));
        CHECK((levels.energies - reference).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(levels.max_pair_splitting < 1e-9);
    }
}

TEST_CASE("amplitudes")
{
    SUBCASE("identity rotation gives identity up to signs")
    {
        const Eigen::Matrix3d m =
            transition_amplitudes(ground, excited, angles({0, 0, 0}), AmplitudeModel::PrincipalAxis, ops);
        CHECK((m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        // spin overlaps are only diagonal when the two tensors share their asymmetry
        const Manifold twin = make_manifold({10.19 * 0.5, 17.30 * 0.5}, ops);
        const Eigen::Matrix3d s =
            transition_amplitudes(ground, twin, angles({0, 0, 0}), AmplitudeModel::SpinOverlap, ops);
        CHECK((s.cwiseAbs() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("reference amplitude table")
    {
        Eigen::Matrix3d table;
        table << 0.753, -0.602, -0.265, -0.634, -0.772, -0.048, -0.176, 0.204, -0.963;
        const Eigen::Matrix3d m =
            transition_amplitudes(ground, excited, angles({10.3, -164.4, -130.7}), AmplitudeModel::PrincipalAxis, ops);
        CHECK((m - table).cwiseAbs().maxCoeff() < 0.03);
        CHECK((m - table).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("unresolved levels are rejected")
    {
        const Manifold flat = make_manifold({0.0, 0.0}, ops);
        CHECK_THROWS_AS(transition_amplitudes(flat, excited, angles({1, 2, 3}), AmplitudeModel::SpinOverlap, ops),
                        NumericalError);
    }
}

TEST_CASE("property: squared amplitudes are doubly stochastic")
{
    std::mt19937_64 rng(2);
    for (int n = 0; n < 200; ++n) {
        const auto a = angles(random_angles(rng));
        for (auto model : {AmplitudeModel::PrincipalAxis, AmplitudeModel::SpinOverlap}) {
            const Eigen::Matrix3d f = transition_amplitudes(ground, excited, a, model, ops).cwiseAbs2();
            CHECK((f.rowwise().sum() - Eigen::Vector3d::Ones()).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((f.colwise().sum().transpose() - Eigen::Vector3d::Ones()).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("euler angle conventions")
{
    std::mt19937_64 rng(3);
    for (int n = 0; n < 200; ++n) {
        const Eigen::Vector3d a = random_angles(rng);
        const Eigen::Matrix3d r = rotation_zyz(a[0], a[1], a[2]);
        for (const auto& b : zyz_angles(r)) {
            CHECK((rotation_zyz(b[0], b[1], b[2]) - r).cwiseAbs().maxCoeff() < 1e-9);
        }
        // canonical representative produces the same strengths
        const Eigen::Vector3d c = canonicalize_angles(a, {10.3, -164.4, -130.7});
        const Eigen::Matrix3d rc = rotation_zyz(c[0], c[1], c[2]);
        CHECK((rc.cwiseAbs2() - r.cwiseAbs2()).cwiseAbs().maxCoeff() < 1e-9);
        for (int k = 0; k < 3; ++k) {
            CHECK(c[k] > -180.0);
            CHECK(c[k] <= 180.0);
        }
    }
    const Mat6 d = spin_rotation(ops, 0.0, 90.0, 0.0);
    CHECK((d * ops.iz * d.adjoint() - ops.ix).norm() < 1e-12);
}

TEST_CASE("fit round trip through the forward model")
{
    std::mt19937_64 rng(4);
    const Eigen::Vector3d reference(10.3, -164.4, -130.7);
    int checked = 0;
    while (checked < 12) {
        const Eigen::Vector3d a = random_angles(rng);
        if (std::abs(std::sin(a[1] * kPi / 180.0)) < 0.3) {
            continue;
        }
        const Eigen::Matrix3d target =
            transition_amplitudes(ground, excited, angles(a), AmplitudeModel::PrincipalAxis, ops).cwiseAbs2();
        FitOptions options;
        options.reference = reference;
        const auto fit = fit_euler_angles(target, ground, excited, ops, options);
        const Eigen::Vector3d expected = canonicalize_angles(a, reference);
        CHECK(fit.rms < 1e-10);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(wrap_degrees(fit.angles.vector()[k] - expected[k])) < 1e-6);
        }

        // idempotence: refit the strengths of the fitted angles
        const Eigen::Matrix3d again = fit.amplitudes.cwiseAbs2();
        const auto refit = fit_euler_angles(again, ground, excited, ops, options);
        CHECK((refit.angles.vector() - fit.angles.vector()).cwiseAbs().maxCoeff() < 1e-6);
        ++checked;
    }
}

TEST_CASE("fit rejects non-stochastic targets")
{
    Eigen::Matrix3d bad = Eigen::Matrix3d::Constant(0.5);
    CHECK_THROWS_AS(fit_euler_angles(bad, ground, excited, ops), ConfigError);
}

TEST_CASE("transition table")
{
    const auto table = transition_table({10.19, 17.30}, {4.58, 4.84});
    SUBCASE("diagonal is zero")
    {
        for (int k = 0; k < 9; ++k) {
            CHECK(table.detuning(k, k) == 0.0);
        }
    }
    SUBCASE("excited-only detunings")
    {
        // class A = lowest transition: higher excited levels of the same ground state
        CHECK(table.detuning(0, 1) == doctest::Approx(4.58));
        CHECK(table.detuning(0, 2) == doctest::Approx(9.42));
        CHECK(table.detuning(1, 0) == doctest::Approx(-4.58));
        CHECK(table.detuning(1, 2) == doctest::Approx(4.84));
        CHECK(table.detuning(2, 0) == doctest::Approx(-9.42));
        CHECK(table.detuning(2, 1) == doctest::Approx(-4.84));
        for (int x = 0; x < 9; ++x) {
            for (int y = 0; y < 9; ++y) {
                CHECK(table.shares_ground(x, y) == (x / 3 == y / 3));
            }
        }
    }
    SUBCASE("bold entries depend only on the excited spacings")
    {
        const auto other = transition_table({12.0, 15.5}, {4.58, 4.84});
        for (int x = 0; x < 9; ++x) {
            for (int y = 0; y < 9; ++y) {
                if (table.shares_ground(x, y)) {
                    CHECK(table.detuning(x, y) == doctest::Approx(other.detuning(x, y)));
                } else {
                    CHECK(table.detuning(x, y) != doctest::Approx(other.detuning(x, y)));
                }
            }
        }
    }
    SUBCASE("antisymmetric under class/transition exchange")
    {
        int pairs = 0;
        for (int x = 0; x < 9; ++x) {
            for (int y = x + 1; y < 9; ++y) {
                CHECK(table.detuning(x, y) + table.detuning(y, x) == doctest::Approx(0.0).epsilon(1e-12));
                ++pairs;
            }
        }
        CHECK(pairs == 36);
    }
    SUBCASE("degenerate manifolds")
    {
        const auto zero = transition_table({0.0, 0.0}, {0.0, 0.0});
        CHECK(zero.detuning.cwiseAbs().maxCoeff() == 0.0);
    }
}
