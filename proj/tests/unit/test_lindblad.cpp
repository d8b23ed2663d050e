#include <limits>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"

#include "afc/hyperfine.hpp"
#include "afc/lindblad.hpp"

using namespace afc;
using namespace afc::lindblad;

namespace {

constexpr double kNoDecay = std::numeric_limits<double>::infinity();

Mat6 random_hermitian(std::mt19937_64& rng, double scale)
{
    std::normal_distribution<double> n;
    Mat6 a;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            a(i, j) = Complex(n(rng), n(rng));
        }
    }
    return scale * 0.5 * (a + a.adjoint());
}

Eigen::Matrix3d random_branching(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::Matrix3d b;
    for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
            b(i, j) = u(rng);
        }
        b.col(j) /= b.col(j).sum();
    }
    return b;
}

Super random_generator(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RelaxationModel relax;
    relax.branching = random_branching(rng);
    relax.excited_lifetime_us = 0.05 + u(rng);
    relax.dephasing_rate = u(rng) < 0.5 ? 0.0 : u(rng);
    return build_generator(random_hermitian(rng, 1.0 + 5.0 * u(rng)), relax);
}

double induced_norm1(const Super& m)
{
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

Mat6 thermal_ground()
{
    Mat6 s = Mat6::Zero();
    s(0, 0) = s(1, 1) = s(2, 2) = 1.0 / 3.0;
    return s;
}

IonModel reference_ion()
{
    const auto ops = hyperfine::build_spin_operators();
    const auto g = hyperfine::make_manifold({10.19, 17.30}, ops);
    const auto e = hyperfine::make_manifold({4.58, 4.84}, ops);
    hyperfine::EulerAngles a;
    a.alpha = 10.3;
    a.beta = -164.4;
    a.gamma = -130.7;
    IonModel ion;
    ion.ground_mhz = hyperfine::energies_from_spacings({10.19, 17.30});
    ion.excited_mhz = hyperfine::energies_from_spacings({4.58, 4.84});
    ion.amplitudes = hyperfine::transition_amplitudes(g, e, a, hyperfine::AmplitudeModel::PrincipalAxis, ops);
    ion.relax.branching = ion.amplitudes.cwiseAbs2();
    return ion;
}

// chirped comb-like envelope: a few tones with random phases
PeriodicDrive comb_drive(double frep, double rabi)
{
    PeriodicDrive d;
    d.period_us = 1.0 / frep;
    d.rabi_strength = rabi;
    const int n = static_cast<int>(std::lround(d.period_us / 1e-3));
    d.envelope.resize(n);
    for (int k = 0; k < n; ++k) {
        const double t = k * d.period_us / n;
        Complex s = 0.0;
        for (int m = -5; m <= 5; ++m) {
            s += std::exp(Complex(0.0, -kTwoPi * m * frep * t + 0.7 * m * m));
        }
        d.envelope[k] = s / std::sqrt(11.0);
    }
    return d;
}

} // namespace

TEST_CASE("generator construction")
{
    RelaxationModel none;
    none.excited_lifetime_us = kNoDecay;
    SUBCASE("zero Hamiltonian, no decay")
    {
        CHECK(build_generator(Mat6::Zero(), none).norm() == 0.0);
    }
    SUBCASE("ground populations do not decay")
    {
        std::mt19937_64 rng(5);
        RelaxationModel relax;
        relax.branching = random_branching(rng);
        const Super l = build_generator(Mat6::Zero(), relax);
        CHECK((l * vectorize(thermal_ground())).norm() < 1e-15);
    }
    SUBCASE("rate-equation limit: decay of |e,5/2> follows the branching column")
    {
        const IonModel ion = reference_ion();
        const Super l = build_generator(Mat6::Zero(), ion.relax);
        Mat6 s = Mat6::Zero();
        s(5, 5) = 1.0;
        const double dt = 1e-3;
        const Mat6 later = unvectorize(matrix_exp(Super(l * dt)) * vectorize(s));
        const Eigen::Vector3d gain(later(0, 0).real(), later(1, 1).real(), later(2, 2).real());
        const Eigen::Vector3d expected(0.265 * 0.265, 0.048 * 0.048, 0.963 * 0.963);
        CHECK((gain / gain.sum() - expected / expected.sum()).cwiseAbs().maxCoeff() < 2e-3);
        CHECK(gain.sum() == doctest::Approx(1.0 - std::exp(-dt / 164.0)).epsilon(1e-9));
    }
    SUBCASE("invalid relaxation is rejected")
    {
        RelaxationModel bad;
        bad.excited_lifetime_us = -1.0;
        CHECK_THROWS_AS(build_generator(Mat6::Zero(), bad), ConfigError);
        RelaxationModel unnormalized;
        unnormalized.branching = Eigen::Matrix3d::Constant(0.5);
        CHECK_THROWS_AS(build_generator(Mat6::Zero(), unnormalized), ConfigError);
    }
}

TEST_CASE("real Hermitian basis")
{
    std::mt19937_64 rng(6);
    for (int n = 0; n < 20; ++n) {
        const Mat6 h = random_hermitian(rng, 1.0);
        CHECK((from_coords(to_coords(h)) - h).norm() < 1e-13);
        CHECK(to_coords(h).head<6>().sum() == doctest::Approx(h.trace().real()));
        const Super l = random_generator(rng);
        CHECK((to_complex(to_real(l)) - l).norm() < 1e-11 * l.norm());
    }
}

TEST_CASE("matrix exponential")
{
    SUBCASE("exp(0) = identity")
    {
        CHECK(matrix_exp(Super(Super::Zero())) == Super::Identity());
    }
    SUBCASE("diagonal")
    {
        Eigen::Matrix2cd d = Eigen::Matrix2cd::Zero();
        d(0, 0) = Complex(0.7, -0.3);
        d(1, 1) = Complex(-1.0, 0.0);
        const Eigen::Matrix2cd e = matrix_exp(d);
        CHECK(std::abs(e(0, 0) - std::exp(d(0, 0))) < 1e-12);
        CHECK(std::abs(e(1, 1) - std::exp(d(1, 1))) < 1e-12);
        CHECK(std::abs(e(0, 1)) == 0.0);
    }
    SUBCASE("adaptive order")
    {
        CHECK(horner_terms(0.0) == 1);
        CHECK(horner_terms(1.0) <= 30);
        CHECK(horner_terms(0.1) < horner_terms(1.0));
    }
}

TEST_CASE("property: Horner series matches scaling-and-squaring")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int n = 0; n < 200; ++n) {
        const Super l = random_generator(rng);
        const Super m = l * (u(rng) / induced_norm1(l));
        const Super oracle = m.exp();
        CHECK((matrix_exp(m) - oracle).norm() <= 1e-10 * oracle.norm());
        // and the adaptive order used inside the propagator
        CHECK((matrix_exp(m, horner_terms(induced_norm1(m))) - oracle).norm() <= 1e-10 * oracle.norm());
    }
}

TEST_CASE("property: generators preserve trace, Hermiticity and complete positivity")
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Vec36 trace_functional = Vec36::Zero();
    for (int k = 0; k < 6; ++k) {
        trace_functional[7 * k] = 1.0;
    }
    for (int n = 0; n < 200; ++n) {
        const Super l = random_generator(rng);
        CHECK((trace_functional.transpose() * l).norm() < 1e-10);
        const Super map = matrix_exp(Super(l * (u(rng) / induced_norm1(l))));
        CHECK(choi_min_eigenvalue(map) > -1e-8);
        CHECK(to_complex(to_real(map)).isApprox(map, 1e-10));
        const Mat6 out = unvectorize(map * vectorize(thermal_ground()));
        const auto check = check_state(out);
        CHECK(check.trace_error < 1e-10);
        CHECK(check.hermiticity_error < 1e-10);
        CHECK(check.min_eigenvalue > -1e-10);
    }
}

TEST_CASE("period propagator")
{
    SUBCASE("zero drive, no decay: identity up to the rotating frame")
    {
        IonModel ion = reference_ion();
        ion.relax.excited_lifetime_us = kNoDecay;
        PropagatorEngine engine(ion, PeriodicDrive::continuous_wave(0.0, 0.0, 0.2));
        const auto p = engine.period_propagator(0.0);
        // populations and ground coherences are untouched
        for (int k = 0; k < 6; ++k) {
            CHECK((p.p.row(k) - RealSuper::Identity().row(k)).norm() < 1e-12);
        }
        IonModel flat = ion;
        flat.ground_mhz.setZero();
        flat.excited_mhz.setZero();
        PropagatorEngine still(flat, PeriodicDrive::continuous_wave(0.0, 0.0, 0.2));
        CHECK((still.period_propagator(0.0).p - RealSuper::Identity()).norm() < 1e-12);
    }
    SUBCASE("zero drive, finite lifetime: excited population decays exponentially")
    {
        IonModel ion = reference_ion();
        ion.relax.excited_lifetime_us = 0.5;
        const double period = 0.3;
        PropagatorEngine engine(ion, PeriodicDrive::continuous_wave(0.0, 0.0, period));
        const auto p = engine.period_propagator(12.0);
        Mat6 s = Mat6::Zero();
        s(4, 4) = 1.0;
        const Mat6 out = from_coords(p.p * to_coords(s));
        CHECK(out(4, 4).real() == doctest::Approx(std::exp(-period / 0.5)).epsilon(1e-10));
        CHECK(check_state(out).trace_error < 1e-12);
    }
    SUBCASE("commensurate step")
    {
        PropagatorEngine engine(reference_ion(), PeriodicDrive::continuous_wave(0.01, 0.0, 1.0 / 4.7));
        CHECK(engine.steps() == 213);
        CHECK(engine.steps() * engine.dt_us() == doctest::Approx(1.0 / 4.7).epsilon(1e-15));
    }
    SUBCASE("rejections")
    {
        CHECK_THROWS_AS(PropagatorEngine(reference_ion(), PeriodicDrive::continuous_wave(0.01, 0.0, 0.0015)),
                        ConfigError);
        CHECK_THROWS_AS(PropagatorEngine(reference_ion(), PeriodicDrive::continuous_wave(400.0, 0.0, 0.2)),
                        NumericalError);
    }
    SUBCASE("resonant CW drive excites the ion")
    {
        const IonModel ion = reference_ion();
        PropagatorEngine engine(ion, PeriodicDrive::continuous_wave(0.5, 0.0, 0.002));
        const RealSuper q = engine.period_propagator(0.0).corrected();
        const RealVec36 x = power_propagator(q, 1000) * to_coords(thermal_ground());
        const Mat6 on = from_coords(x);
        const RealSuper q_far = engine.period_propagator(3.0).corrected();
        const Mat6 off = from_coords(power_propagator(q_far, 1000) * to_coords(thermal_ground()));
        CHECK(on.diagonal().tail<3>().real().sum() > 0.01);
        CHECK(off.diagonal().tail<3>().real().sum() < 0.1 * on.diagonal().tail<3>().real().sum());
    }
}

TEST_CASE("frame correction reproduces the continuous drive phase across periods")
{
    // the literal product over three periods, phase continuing in time, must
    // give the same state as three frame-corrected single periods
    const IonModel ion = reference_ion();
    const double frep = 5.0; // whole number of steps per period
    PeriodicDrive one = comb_drive(frep, 0.2);
    PeriodicDrive three = one;
    three.period_us = 3.0 * one.period_us;
    three.envelope.clear();
    for (int r = 0; r < 3; ++r) {
        three.envelope.insert(three.envelope.end(), one.envelope.begin(), one.envelope.end());
    }
    PropagatorEngine e1(ion, one);
    PropagatorEngine e3(ion, three);
    for (double detuning : {0.0, 1.37, -7.9, 40.2}) {
        const auto p1 = e1.period_propagator(detuning);
        const RealSuper literal = e3.period_propagator(detuning).p;
        const RealSuper folded = p1.frame * p1.frame * p1.frame * power_propagator(p1.corrected(), 3);
        CHECK((literal - folded).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("power propagator")
{
    const IonModel ion = reference_ion();
    PropagatorEngine engine(ion, comb_drive(4.8, 0.3));
    const RealSuper p = engine.period_propagator(2.1).corrected();
    CHECK(power_propagator(p, 0) == RealSuper::Identity());
    CHECK(power_propagator(p, 1) == p);
    for (std::uint64_t n : {2, 3, 5, 8, 16}) {
        RealSuper sequential = RealSuper::Identity();
        for (std::uint64_t k = 0; k < n; ++k) {
            sequential = (p * sequential).eval();
        }
        CHECK((power_propagator(p, n) - sequential).cwiseAbs().maxCoeff() < 1e-8);
        const Super pc = to_complex(p);
        Super sc = Super::Identity();
        for (std::uint64_t k = 0; k < n; ++k) {
            sc = (pc * sc).eval();
        }
        CHECK((power_propagator(pc, n) - sc).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("30 s at 4.8 MHz costs a logarithmic number of squarings")
    {
        PowerStats stats;
        const RealSuper big = power_propagator(p, 144000000ULL, &stats);
        CHECK(stats.squarings <= 28);
        CHECK(stats.multiplications <= 28);
        const Mat6 out = from_coords(big * to_coords(thermal_ground()));
        const auto check = check_state(out);
        CHECK(check.trace_error < 1e-8);
        CHECK(check.hermiticity_error < 1e-9);
        CHECK(check.min_eigenvalue > -1e-7);
    }
}

TEST_CASE("property: long evolutions stay physical")
{
    const IonModel ion = reference_ion();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> det(-20.0, 20.0);
    std::uniform_real_distribution<double> rabi(0.0, 0.5);
    std::uniform_int_distribution<int> rate(0, 5);
    const double freps[] = {2.0, 3.3, 4.8, 8.0, 16.0};
    int cases = 0;
    for (int n = 0; n < 40; ++n) {
        PropagatorEngine engine(ion, comb_drive(freps[n % 5], rabi(rng)));
        for (int m = 0; m < 5; ++m) {
            const RealSuper q = engine.period_propagator(det(rng)).corrected();
            const Mat6 out = from_coords(power_propagator(q, 1000000) * to_coords(thermal_ground()));
            const auto check = check_state(out);
            CHECK(check.trace_error < 1e-8);
            CHECK(check.hermiticity_error < 1e-9);
            CHECK(check.min_eigenvalue > -1e-7);
            ++cases;
        }
    }
    CHECK(cases == 200);
}

TEST_CASE("zero drive keeps ground populations constant")
{
    const IonModel ion = reference_ion();
    PropagatorEngine engine(ion, PeriodicDrive::continuous_wave(0.0, 0.0, 0.25));
    Mat6 s = thermal_ground();
    s(0, 0) = 0.5;
    s(1, 1) = 0.2;
    s(2, 2) = 0.3;
    s(0, 2) = s(2, 0) = 0.1;
    const Mat6 out = from_coords(power_propagator(engine.period_propagator(3.0).corrected(), 1u << 20) * to_coords(s));
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(out(k, k) - s(k, k)) < 1e-12);
    }
}

TEST_CASE("free evolution empties the excited manifold")
{
    const IonModel ion = reference_ion();
    Mat6 s = Mat6::Zero();
    s(3, 3) = 0.5;
    s(0, 0) = 0.5;
    const Mat6 out = from_coords(free_evolution(ion, 10000.0) * to_coords(s));
    CHECK(out.diagonal().tail<3>().real().sum() == doctest::Approx(0.5 * std::exp(-10000.0 / 164.0)).epsilon(1e-6));
    CHECK(check_state(out).trace_error < 1e-9);
}
