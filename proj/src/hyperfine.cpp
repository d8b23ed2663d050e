#include "afc/hyperfine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

namespace afc::hyperfine {

namespace {

constexpr double kSpin = 2.5;
constexpr double kDeg = kPi / 180.0;

Mat6 exp_i_hermitian(const Mat6& h, double angle)
{
    // exp(-i angle h) for Hermitian h
    Eigen::SelfAdjointEigenSolver<Mat6> solver(h);
    Eigen::Matrix<Complex, 6, 1> phases;
    for (int k = 0; k < 6; ++k) {
        phases[k] = std::exp(Complex(0.0, -angle * solver.eigenvalues()[k]));
    }
    return solver.eigenvectors() * phases.asDiagonal() * solver.eigenvectors().adjoint();
}

std::array<double, 2> unit_gaps(double eta, const SpinOperators& ops)
{
    Eigen::Matrix3d q = 2.0 * Eigen::Vector3d(eta - 1.0 / 3.0, -eta - 1.0 / 3.0, 2.0 / 3.0).asDiagonal();
    return level_spacings(build_hamiltonian(q, ops));
}

double angle_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b)
{
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = wrap_degrees(a[k] - b[k]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

Eigen::Vector3d wrapped(const Eigen::Vector3d& v)
{
    return {wrap_degrees(v[0]), wrap_degrees(v[1]), wrap_degrees(v[2])};
}

// Level k (ascending energy) sits on this principal axis.
std::array<int, 3> level_axes(const Eigen::Matrix3d& q)
{
    const Eigen::Matrix3d off = q - Eigen::Matrix3d(q.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff())) {
        throw ConfigError("principal-axis amplitude model needs tensors in their principal frame");
    }
    if (q(2, 2) >= 0.0) {
        return {0, 1, 2};
    }
    return {2, 1, 0};
}

struct StrengthResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const Eigen::Matrix3d* target;
    const Manifold* ground;
    const Manifold* excited;
    const SpinOperators* ops;
    AmplitudeModel model;

    int inputs() const { return 3; }
    int values() const { return 9; }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const
    {
        EulerAngles a;
        a.alpha = x[0];
        a.beta = x[1];
        a.gamma = x[2];
        const Eigen::Matrix3d m = transition_amplitudes(*ground, *excited, a, model, *ops);
        const Eigen::Matrix3d r = m.cwiseAbs2() - *target;
        fvec = Eigen::Map<const Eigen::VectorXd>(r.data(), 9);
        return 0;
    }
};

} // namespace

SpinOperators build_spin_operators()
{
    Mat6 plus = Mat6::Zero();
    Mat6 iz = Mat6::Zero();
    for (int k = 0; k < 6; ++k) {
        const double m = kSpin - k;
        iz(k, k) = m;
        if (k > 0) {
            plus(k - 1, k) = std::sqrt(kSpin * (kSpin + 1.0) - m * (m + 1.0));
        }
    }
    SpinOperators ops;
    ops.ix = 0.5 * (plus + plus.adjoint());
    ops.iy = Complex(0.0, -0.5) * (plus - plus.adjoint());
    ops.iz = iz;
    return ops;
}

Mat6 build_hamiltonian(const Eigen::Matrix3d& q, const SpinOperators& ops)
{
    const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    require((q - q.transpose()).cwiseAbs().maxCoeff() == 0.0, "quadrupole tensor must be symmetric");
    require(std::abs(q.trace()) <= 1e-12 * scale, "quadrupole tensor must be traceless");

    const std::array<const Mat6*, 3> i{&ops.ix, &ops.iy, &ops.iz};
    Mat6 h = Mat6::Zero();
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (q(a, b) != 0.0) {
                h += 0.5 * q(a, b) * (*i[a]) * (*i[b]);
            }
        }
    }
    return 0.5 * (h + h.adjoint());
}

KramersLevels kramers_levels(const Mat6& h)
{
    Eigen::SelfAdjointEigenSolver<Mat6> solver(h);
    KramersLevels levels;
    levels.vectors = solver.eigenvectors();
    // fix the arbitrary phase: largest component real and positive
    for (int c = 0; c < 6; ++c) {
        Eigen::Index big = 0;
        levels.vectors.col(c).cwiseAbs().maxCoeff(&big);
        const Complex v = levels.vectors(big, c);
        levels.vectors.col(c) *= std::conj(v) / std::abs(v);
    }
    const auto& w = solver.eigenvalues();
    for (int k = 0; k < 3; ++k) {
        levels.energies[k] = 0.5 * (w[2 * k] + w[2 * k + 1]);
        levels.max_pair_splitting = std::max(levels.max_pair_splitting, w[2 * k + 1] - w[2 * k]);
    }
    levels.min_level_gap = std::min(w[2] - w[1], w[4] - w[3]);
    return levels;
}

std::array<double, 2> level_spacings(const Mat6& h)
{
    const auto levels = kramers_levels(h);
    return {levels.energies[1] - levels.energies[0], levels.energies[2] - levels.energies[1]};
}

Eigen::Matrix3d quadrupole_from_spacings(double lower, double upper)
{
    require(lower >= 0.0 && upper >= 0.0, "manifold spacings must be non-negative");
    if (lower == 0.0 && upper == 0.0) {
        return Eigen::Matrix3d::Zero();
    }
    require(lower > 0.0 && upper > 0.0, "manifold spacings must both be positive");

    static const SpinOperators ops = build_spin_operators();
    const double wanted = lower / upper;
    // D > 0 reaches gap ratios in [1/2, 1], D < 0 mirrors them into [1, 2]
    const bool inverted = wanted > 1.0;
    const double ratio = inverted ? 1.0 / wanted : wanted;
    require(ratio >= 0.5 - 1e-12, "spacing ratio outside the range of a spin-5/2 quadrupole (1/2..2)");

    auto mismatch = [&](double eta) {
        const auto g = unit_gaps(eta, ops);
        return g[0] / g[1] - ratio;
    };
    double lo = 0.0;
    double hi = 1.0 / 3.0;
    if (mismatch(lo) >= 0.0) {
        hi = lo;
    } else if (mismatch(hi) <= 0.0) {
        lo = hi;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) < 0.0 ? lo : hi) = mid;
    }
    const double eta = 0.5 * (lo + hi);
    const auto g = unit_gaps(eta, ops);
    double d = (lower + upper) / (g[0] + g[1]);
    if (inverted) {
        d = -d;
    }
    const double e = eta * d;
    Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
    q(0, 0) = 2.0 * (e - d / 3.0);
    q(1, 1) = 2.0 * (-e - d / 3.0);
    q(2, 2) = -(q(0, 0) + q(1, 1));
    return q;
}

Eigen::Matrix3d rotation_zyz(double alpha, double beta, double gamma)
{
    return (Eigen::AngleAxisd(alpha * kDeg, Eigen::Vector3d::UnitZ())
            * Eigen::AngleAxisd(beta * kDeg, Eigen::Vector3d::UnitY())
            * Eigen::AngleAxisd(gamma * kDeg, Eigen::Vector3d::UnitZ()))
        .toRotationMatrix();
}

std::array<Eigen::Vector3d, 2> zyz_angles(const Eigen::Matrix3d& r)
{
    const double c = std::clamp(r(2, 2), -1.0, 1.0);
    const double b = std::acos(c);
    const double s = std::sin(b);
    double a = 0.0;
    double g = 0.0;
    if (s > 1e-9) {
        a = std::atan2(r(1, 2), r(0, 2));
        g = std::atan2(r(2, 1), -r(2, 0));
    } else if (c > 0.0) {
        a = std::atan2(r(1, 0), r(0, 0));
    } else {
        a = std::atan2(-r(1, 0), -r(0, 0));
    }
    const Eigen::Vector3d first(a / kDeg, b / kDeg, g / kDeg);
    const Eigen::Vector3d second(a / kDeg + 180.0, -b / kDeg, g / kDeg + 180.0);
    return {wrapped(first), wrapped(second)};
}

Mat6 spin_rotation(const SpinOperators& ops, double alpha, double beta, double gamma)
{
    return exp_i_hermitian(ops.iz, alpha * kDeg) * exp_i_hermitian(ops.iy, beta * kDeg)
        * exp_i_hermitian(ops.iz, gamma * kDeg);
}

AmplitudeModel parse_amplitude_model(const std::string& name)
{
    if (name == "principal_axis") {
        return AmplitudeModel::PrincipalAxis;
    }
    if (name == "spin_overlap") {
        return AmplitudeModel::SpinOverlap;
    }
    throw ConfigError("unknown amplitude model '" + name + "' (principal_axis | spin_overlap)");
}

std::string to_string(AmplitudeModel model)
{
    return model == AmplitudeModel::PrincipalAxis ? "principal_axis" : "spin_overlap";
}

Manifold make_manifold(const std::array<double, 2>& spacings, const SpinOperators& ops)
{
    Manifold m;
    m.q = quadrupole_from_spacings(spacings[0], spacings[1]);
    m.h = build_hamiltonian(m.q, ops);
    return m;
}

Eigen::Matrix3d transition_amplitudes(const Manifold& ground,
                                      const Manifold& excited,
                                      const EulerAngles& rel,
                                      AmplitudeModel model,
                                      const SpinOperators& ops)
{
    const auto lg = kramers_levels(ground.h);
    const auto le = kramers_levels(excited.h);
    for (const auto* l : {&lg, &le}) {
        const double scale = std::max(1.0, l->energies.cwiseAbs().maxCoeff());
        require_numerics(l->max_pair_splitting < 1e-9 * scale, "Kramers pairs not degenerate");
        require_numerics(l->min_level_gap > 1e-6 * scale, "hyperfine levels not resolved");
    }

    if (model == AmplitudeModel::PrincipalAxis) {
        const auto ag = level_axes(ground.q);
        const auto ae = level_axes(excited.q);
        const Eigen::Matrix3d r = rotation_zyz(rel.alpha, rel.beta, rel.gamma);
        Eigen::Matrix3d m;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m(i, j) = r(ag[i], ae[j]);
            }
        }
        return m;
    }

    const Mat6 rotated = spin_rotation(ops, rel.alpha, rel.beta, rel.gamma) * le.vectors;
    const Mat6 overlap = lg.vectors.adjoint() * rotated;
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const auto block = overlap.block<2, 2>(2 * i, 2 * j);
            Eigen::Index r = 0;
            Eigen::Index c = 0;
            block.cwiseAbs().maxCoeff(&r, &c);
            const double sign = block(r, c).real() < 0.0 ? -1.0 : 1.0;
            m(i, j) = sign * std::sqrt(0.5 * block.cwiseAbs2().sum());
        }
    }
    return m;
}

Eigen::Vector3d canonicalize_angles(const Eigen::Vector3d& angles, const Eigen::Vector3d& reference)
{
    // Point-group images: pi rotations about principal axes of either tensor.
    static const std::array<Eigen::Vector3d, 4> flips{
        Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, -1, -1),
        Eigen::Vector3d(-1, 1, -1), Eigen::Vector3d(-1, -1, 1)};
    const Eigen::Matrix3d r = rotation_zyz(angles[0], angles[1], angles[2]);
    Eigen::Vector3d best = wrapped(angles);
    double best_distance = angle_distance(best, reference);
    for (const auto& left : flips) {
        for (const auto& right : flips) {
            const Eigen::Matrix3d image = left.asDiagonal() * r * right.asDiagonal();
            for (const auto& candidate : zyz_angles(image)) {
                const double d = angle_distance(candidate, reference);
                if (d < best_distance - 1e-12) {
                    best_distance = d;
                    best = candidate;
                }
            }
        }
    }
    return best;
}

FitResult fit_euler_angles(const Eigen::Matrix3d& target,
                           const Manifold& ground,
                           const Manifold& excited,
                           const SpinOperators& ops,
                           const FitOptions& options)
{
    require(options.starts >= 1, "fit needs at least one start");
    for (int k = 0; k < 3; ++k) {
        require(std::abs(target.row(k).sum() - 1.0) <= 0.05, "target strengths: row sums must be 1 within 0.05");
        require(std::abs(target.col(k).sum() - 1.0) <= 0.05, "target strengths: column sums must be 1 within 0.05");
    }

    StrengthResidual functor{&target, &ground, &excited, &ops, options.model};
    Eigen::NumericalDiff<StrengthResidual> numeric(functor);

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> uniform(-180.0, 180.0);

    FitResult result;
    double best_ssr = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x(3);
    bool best_converged = false;
    int converged_starts = 0;

    for (int start = 0; start < options.starts; ++start) {
        Eigen::VectorXd x(3);
        x << uniform(rng), uniform(rng), uniform(rng);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<StrengthResidual>> lm(numeric);
        lm.parameters.xtol = 1e-14;
        lm.parameters.ftol = 1e-16;
        lm.parameters.maxfev = 4000;
        const auto status = lm.minimize(x);
        const bool converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall
            || status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall
            || status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall
            || status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall;
        converged_starts += converged ? 1 : 0;
        Eigen::VectorXd f(9);
        functor(x, f);
        const double ssr = f.squaredNorm();
        // strict improvement only: ties keep the lowest start index
        if (ssr < best_ssr) {
            best_ssr = ssr;
            best_x = x;
            best_converged = converged;
            result.best_start = start;
        }
    }

    // local-curvature uncertainty from a central-difference Jacobian
    Eigen::Matrix<double, 9, 3> jac;
    const double h = 1e-4;
    for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd xp = best_x;
        Eigen::VectorXd xm = best_x;
        xp[k] += h;
        xm[k] -= h;
        Eigen::VectorXd fp(9);
        Eigen::VectorXd fm(9);
        functor(xp, fp);
        functor(xm, fm);
        jac.col(k) = (fp - fm) / (2.0 * h);
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    Eigen::Vector3d sigma = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
    Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
    if (lu.isInvertible()) {
        const Eigen::Matrix3d cov = lu.inverse() * (best_ssr / 6.0);
        sigma = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    }

    const Eigen::Vector3d canonical = canonicalize_angles(best_x, options.reference);
    result.angles.alpha = canonical[0];
    result.angles.beta = canonical[1];
    result.angles.gamma = canonical[2];
    result.angles.sigma = sigma;
    result.amplitudes = transition_amplitudes(ground, excited, result.angles, options.model, ops);
    result.rms = std::sqrt((result.amplitudes.cwiseAbs2() - target).squaredNorm() / 9.0);
    result.converged = best_converged;
    result.diagnostic = std::to_string(converged_starts) + "/" + std::to_string(options.starts)
        + " starts converged; best start " + std::to_string(result.best_start);
    if (!best_converged) {
        result.diagnostic += "; best candidate did not meet the convergence tolerance";
    }
    return result;
}

Eigen::Vector3d energies_from_spacings(const std::array<double, 2>& spacings)
{
    return {0.0, spacings[0], spacings[0] + spacings[1]};
}

std::array<Transition, 9> transitions(const Eigen::Vector3d& ground_energies,
                                      const Eigen::Vector3d& excited_energies)
{
    std::array<Transition, 9> t;
    int n = 0;
    for (int i = 2; i >= 0; --i) {
        for (int j = 0; j < 3; ++j) {
            t[n++] = Transition{i, j, excited_energies[j] - ground_energies[i]};
        }
    }
    std::stable_sort(t.begin(), t.end(),
                     [](const Transition& a, const Transition& b) { return a.offset_mhz < b.offset_mhz; });
    const double lowest = t[0].offset_mhz;
    for (auto& x : t) {
        x.offset_mhz -= lowest;
    }
    return t;
}

TransitionTable transition_table(const std::array<double, 2>& ground_spacings,
                                 const std::array<double, 2>& excited_spacings)
{
    for (double s : {ground_spacings[0], ground_spacings[1], excited_spacings[0], excited_spacings[1]}) {
        require(s >= 0.0, "spacings must be non-negative");
    }
    TransitionTable table;
    table.order = transitions(energies_from_spacings(ground_spacings), energies_from_spacings(excited_spacings));
    for (int x = 0; x < 9; ++x) {
        for (int y = 0; y < 9; ++y) {
            table.detuning(x, y) = table.order[y].offset_mhz - table.order[x].offset_mhz;
        }
    }
    return table;
}

} // namespace afc::hyperfine
