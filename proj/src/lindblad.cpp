#include "afc/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace afc::lindblad {

namespace {

// (a kron b) for 6x6 factors, in the column-stacking convention
Super kron(const Mat6& a, const Mat6& b)
{
    Super out;
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            out.block<6, 6>(6 * i, 6 * j) = a(i, j) * b;
        }
    }
    return out;
}

Super coherent(const Mat6& h)
{
    const Mat6 id = Mat6::Identity();
    return Complex(0.0, -1.0) * (kron(id, h) - kron(h.transpose(), id));
}

Super dissipator(const Mat6& jump)
{
    const Mat6 id = Mat6::Identity();
    const Mat6 n = jump.adjoint() * jump;
    return kron(jump.conjugate(), jump) - 0.5 * kron(id, n) - 0.5 * kron(n.transpose(), id);
}

// columns are vec(B_a) of the orthonormal Hermitian basis
const Super& hermitian_basis()
{
    static const Super basis = [] {
        Super t = Super::Zero();
        const double r = 1.0 / std::sqrt(2.0);
        int a = 0;
        for (int k = 0; k < 6; ++k) {
            t(k + 6 * k, a++) = 1.0;
        }
        for (int k = 0; k < 6; ++k) {
            for (int l = k + 1; l < 6; ++l) {
                t(k + 6 * l, a) = r;
                t(l + 6 * k, a) = r;
                ++a;
            }
        }
        for (int k = 0; k < 6; ++k) {
            for (int l = k + 1; l < 6; ++l) {
                t(k + 6 * l, a) = Complex(0.0, r);
                t(l + 6 * k, a) = Complex(0.0, -r);
                ++a;
            }
        }
        return t;
    }();
    return basis;
}

double norm1(const RealSuper& m)
{
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

} // namespace

void RelaxationModel::validate() const
{
    require(excited_lifetime_us > 0.0, "excited lifetime must be positive");
    require(dephasing_rate >= 0.0, "dephasing rate must be non-negative");
    require((branching.array() >= 0.0).all(), "branching ratios must be non-negative");
    for (int j = 0; j < 3; ++j) {
        require(std::abs(branching.col(j).sum() - 1.0) < 1e-9,
                "branching from each excited level must sum to 1 over ground levels");
    }
}

Super build_generator(const Mat6& h, const RelaxationModel& relax)
{
    relax.validate();
    require((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()),
            "Hamiltonian must be Hermitian");
    Super l = coherent(h);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double rate = relax.branching(i, j) / relax.excited_lifetime_us;
            if (rate > 0.0) {
                Mat6 jump = Mat6::Zero();
                jump(i, 3 + j) = std::sqrt(rate);
                l += dissipator(jump);
            }
        }
    }
    if (relax.dephasing_rate > 0.0) {
        Mat6 pe = Mat6::Zero();
        pe.diagonal().tail<3>().setConstant(std::sqrt(2.0 * relax.dephasing_rate));
        l += dissipator(pe);
    }
    return l;
}

Vec36 vectorize(const Mat6& sigma)
{
    return Eigen::Map<const Vec36>(sigma.data());
}

Mat6 unvectorize(const Vec36& v)
{
    return Eigen::Map<const Mat6>(v.data());
}

RealVec36 to_coords(const Mat6& sigma)
{
    return (hermitian_basis().adjoint() * vectorize(sigma)).real();
}

Mat6 from_coords(const RealVec36& x)
{
    return unvectorize(hermitian_basis() * x.cast<Complex>());
}

RealSuper to_real(const Super& l)
{
    const Super& t = hermitian_basis();
    return (t.adjoint() * l * t).real();
}

Super to_complex(const RealSuper& r)
{
    const Super& t = hermitian_basis();
    return t * r.cast<Complex>() * t.adjoint();
}

int horner_terms(double norm, double tolerance)
{
    // first neglected term of the order-K series is norm^(K+1) / (K+1)!
    double term = norm;
    for (int k = 1; k < 30; ++k) {
        term *= norm / (k + 1);
        if (term < tolerance) {
            return k;
        }
    }
    return 30;
}

void PeriodicDrive::validate() const
{
    require(!envelope.empty(), "drive envelope is empty");
    require(period_us > 0.0, "drive period must be positive");
    require(rabi_strength >= 0.0, "Rabi strength must be non-negative");
    for (const auto& s : envelope) {
        require(std::isfinite(s.real()) && std::isfinite(s.imag()), "drive envelope has non-finite samples");
    }
}

Complex PeriodicDrive::at(double t_us) const
{
    const double n = static_cast<double>(envelope.size());
    double phase = std::fmod(t_us / period_us, 1.0);
    if (phase < 0.0) {
        phase += 1.0;
    }
    const double pos = phase * n;
    auto i0 = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - std::floor(pos);
    i0 = std::min(i0, envelope.size() - 1);
    const std::size_t i1 = (i0 + 1) % envelope.size();
    if (frac < 1e-9) {
        return envelope[i0];
    }
    return (1.0 - frac) * envelope[i0] + frac * envelope[i1];
}

PeriodicDrive PeriodicDrive::continuous_wave(double rabi_strength, double center_mhz, double period_us)
{
    PeriodicDrive d;
    d.envelope = {Complex(1.0, 0.0)};
    d.period_us = period_us;
    d.rabi_strength = rabi_strength;
    d.center_detuning_mhz = center_mhz;
    return d;
}

Mat6 IonModel::frame_hamiltonian() const
{
    int ga = 0;
    int ea = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double nu = excited_mhz[j] - ground_mhz[i];
            if (nu < lowest) {
                lowest = nu;
                ga = i;
                ea = j;
            }
        }
    }
    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = ground_mhz;
    e.tail<3>() = excited_mhz.array() - excited_mhz[ea] + ground_mhz[ga];
    e.array() -= 0.5 * (e.maxCoeff() + e.minCoeff());
    return Mat6((kTwoPi * e).cast<Complex>().asDiagonal());
}

Mat6 IonModel::coupling(Complex c) const
{
    Mat6 h = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            h(3 + j, i) = amplitudes(i, j) * c;
            h(i, 3 + j) = amplitudes(i, j) * std::conj(c);
        }
    }
    return h;
}

PropagatorEngine::PropagatorEngine(const IonModel& ion, const PeriodicDrive& drive, const PropagatorOptions& options)
{
    drive.validate();
    ion.relax.validate();
    require(options.dt_target_us > 0.0, "time step must be positive");
    require(drive.period_us >= 2.0 * options.dt_target_us,
            "drive period shorter than two time steps (insufficient resolution)");

    period_ = drive.period_us;
    center_ = drive.center_detuning_mhz;
    steps_ = static_cast<int>(std::lround(period_ / options.dt_target_us));
    dt_ = period_ / steps_;

    l0_ = to_real(build_generator(ion.frame_hamiltonian(), ion.relax));
    a_ = to_real(coherent(ion.coupling(Complex(1.0, 0.0))));
    b_ = to_real(coherent(ion.coupling(Complex(0.0, 1.0))));

    samples_.resize(steps_);
    double peak = 0.0;
    for (int k = 0; k < steps_; ++k) {
        samples_[k] = kPi * drive.rabi_strength * drive.at(k * dt_);
        peak = std::max(peak, std::abs(samples_[k]));
    }

    const double bound = (norm1(l0_) + peak * (norm1(a_) + norm1(b_))) * dt_;
    require_numerics(bound <= 2.0, "generator norm times time step exceeds 2; reduce the time step");
    terms_ = options.horner_terms > 0 ? options.horner_terms : horner_terms(bound);
}

PeriodPropagator PropagatorEngine::period_propagator(double detuning_mhz) const
{
    const double delta = detuning_mhz - center_;
    PeriodPropagator out;
    out.dt_us = dt_;
    out.steps = steps_;
    out.p.setIdentity();
    RealSuper step;
    for (int k = 0; k < steps_; ++k) {
        const Complex c = samples_[k] * std::exp(Complex(0.0, kTwoPi * delta * k * dt_));
        step.noalias() = dt_ * l0_;
        if (c != Complex(0.0, 0.0)) {
            step.noalias() += (dt_ * c.real()) * a_;
            step.noalias() += (dt_ * c.imag()) * b_;
        }
        out.p = (matrix_exp(step, terms_) * out.p).eval();
    }

    Mat6 w = Mat6::Identity();
    const Complex phase = std::exp(Complex(0.0, std::fmod(kTwoPi * delta * period_, kTwoPi)));
    w.diagonal().tail<3>().setConstant(phase);
    out.frame = to_real(kron(w.conjugate(), w));
    return out;
}

namespace {

// Roundoff in the trace row grows linearly with the power; pull it back
// onto the trace-preserving subspace after every product.
void restore_trace(RealSuper& m)
{
    RealVec36 t = RealVec36::Zero();
    t.head<6>().setOnes();
    const Eigen::Matrix<double, 1, 36> drift = m.topRows<6>().colwise().sum() - t.transpose();
    m.topRows<6>().rowwise() -= drift / 6.0;
}

void restore_trace(Super& m)
{
    Eigen::Matrix<Complex, 1, 36> drift = Eigen::Matrix<Complex, 1, 36>::Zero();
    for (int k = 0; k < 6; ++k) {
        drift += m.row(7 * k);
    }
    for (int k = 0; k < 6; ++k) {
        drift[7 * k] -= 1.0;
    }
    for (int k = 0; k < 6; ++k) {
        m.row(7 * k) -= drift / 6.0;
    }
}

template <typename M>
M power_impl(const M& p, std::uint64_t n, PowerStats* stats)
{
    M result = M::Identity();
    M base = p;
    bool first = true;
    while (n > 0) {
        if (n & 1U) {
            if (first) {
                result = base;
                first = false;
            } else {
                result = (result * base).eval();
                restore_trace(result);
                if (stats) {
                    ++stats->multiplications;
                }
            }
        }
        n >>= 1U;
        if (n > 0) {
            base = (base * base).eval();
            restore_trace(base);
            if (stats) {
                ++stats->squarings;
            }
        }
    }
    return result;
}

} // namespace

RealSuper power_propagator(const RealSuper& p, std::uint64_t n, PowerStats* stats)
{
    return power_impl(p, n, stats);
}

Super power_propagator(const Super& p, std::uint64_t n, PowerStats* stats)
{
    return power_impl(p, n, stats);
}

RealSuper free_evolution(const IonModel& ion, double duration_us, double dt_us)
{
    require(duration_us >= 0.0, "evolution time must be non-negative");
    require(dt_us > 0.0, "time step must be positive");
    if (duration_us == 0.0) {
        return RealSuper::Identity();
    }
    const auto steps = static_cast<std::uint64_t>(std::max(1.0, std::round(duration_us / dt_us)));
    const double dt = duration_us / static_cast<double>(steps);
    const RealSuper m = dt * to_real(build_generator(ion.frame_hamiltonian(), ion.relax));
    require_numerics(norm1(m) <= 2.0, "generator norm times time step exceeds 2; reduce the time step");
    return power_propagator(matrix_exp(m, horner_terms(norm1(m))), steps);
}

double choi_min_eigenvalue(const Super& map)
{
    Super choi;
    for (int k = 0; k < 6; ++k) {
        for (int l = 0; l < 6; ++l) {
            const Mat6 image = unvectorize(map.col(k + 6 * l));
            choi.block<6, 6>(6 * k, 6 * l) = image;
        }
    }
    choi = 0.5 * (choi + choi.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Super> solver(choi, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

StateCheck check_state(const Mat6& sigma)
{
    StateCheck c;
    c.trace_error = std::abs(sigma.trace() - Complex(1.0, 0.0));
    c.hermiticity_error = (sigma - sigma.adjoint()).cwiseAbs().maxCoeff();
    const Mat6 h = 0.5 * (sigma + sigma.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat6> solver(h, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = solver.eigenvalues().minCoeff();
    return c;
}

} // namespace afc::lindblad
