#include "afc/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "afc/fft.hpp"

namespace afc::propagation {

double Waveform::energy() const
{
    double e = 0.0;
    for (const auto& x : u) {
        e += std::norm(x);
    }
    return e * dt_us;
}

Waveform gaussian_pulse(double fwhm_ns, double center_us, std::size_t points, double dt_us)
{
    require(fwhm_ns > 0.0 && dt_us > 0.0, "pulse width and time step must be positive");
    require(fwhm_ns * 1e-3 >= 10.0 * dt_us * (1.0 - 1e-12), "time step does not resolve the pulse (< 10 samples per FWHM)");
    const double sigma = fwhm_ns * 1e-3 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    Waveform w;
    w.dt_us = dt_us;
    w.u.resize(points);
    for (std::size_t n = 0; n < points; ++n) {
        const double x = (w.time(n) - center_us) / sigma;
        w.u[n] = std::exp(-0.5 * x * x);
    }
    return w;
}

double spectral_fwhm_mhz(const Waveform& w)
{
    std::vector<Complex> f = w.u;
    fft::forward(f);
    const std::size_t n = f.size();
    const double df = 1.0 / (static_cast<double>(n) * w.dt_us);
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    const auto half = static_cast<long>(n / 2);
    for (long m = -half; m < static_cast<long>(n) - half; ++m) {
        const auto i = static_cast<Eigen::Index>(m + half);
        x[i] = static_cast<double>(m) * df;
        y[i] = std::abs(f[fft::bin(m, n)]);
    }
    return measure_fwhm(x, y);
}

namespace {

// n - 1 for n = sqrt(1 + x), principal branch, without cancellation near x = 0
Complex index_minus_one(Complex x)
{
    return x / (std::sqrt(1.0 + x) + 1.0);
}

} // namespace

Waveform propagate(const Waveform& pulse,
                   const dielectric::DielectricSpectrum& eps,
                   const dielectric::Optics& optics,
                   const PropagationOptions& options)
{
    const std::size_t n = pulse.size();
    require(n >= 2, "pulse needs at least two samples");
    require(eps.eps_minus_1.size() == eps.grid.points, "dielectric spectrum is incomplete");
    const double df = 1.0 / (static_cast<double>(n) * pulse.dt_us);
    require(std::abs(df - eps.grid.step_mhz) < 1e-9 * eps.grid.step_mhz,
            "pulse frequency resolution must equal the dielectric grid step");

    const double kz = optics.kz();
    std::vector<Complex> f = pulse.u;
    fft::forward(f);
    const auto half = static_cast<long>(n / 2);
    for (long m = -half; m < static_cast<long>(n) - half; ++m) {
        // exp(+i 2 pi m df t) is an optical tone at detuning -m df
        const double detuning = options.carrier_offset_mhz - static_cast<double>(m) * df;
        const double idx = detuning / eps.grid.step_mhz + static_cast<double>(eps.grid.points / 2);
        require(idx >= 0.0 && idx <= static_cast<double>(eps.grid.points - 1),
                "pulse bandwidth exceeds the dielectric grid");
        const Complex x = eps.eps_minus_1[eps.grid.index_of(detuning)];
        require_numerics(std::abs(x) < 0.1, "|eps - 1| too large for the principal-branch index");
        f[fft::bin(m, n)] *= std::exp(Complex(0.0, 1.0) * index_minus_one(x) * kz);
    }
    fft::inverse(f);

    Waveform out;
    out.t0_us = pulse.t0_us;
    out.dt_us = pulse.dt_us;
    const auto keep = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(options.keep_us / pulse.dt_us)));
    out.u.assign(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(keep));
    return out;
}

std::vector<double> transmission_spectrum(const dielectric::DielectricSpectrum& eps,
                                          const dielectric::Optics& optics)
{
    const double kz = optics.kz();
    std::vector<double> t(eps.eps_minus_1.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] = std::exp(-2.0 * dielectric::n2(eps.eps_minus_1[k]) * kz);
    }
    return t;
}

std::vector<double> transmission_spectrum(const dielectric::DielectricSpectrum& eps,
                                          const dielectric::DielectricSpectrum& baseline,
                                          const dielectric::Optics& optics)
{
    require(eps.eps_minus_1.size() == baseline.eps_minus_1.size(), "spectrum and baseline grids differ");
    auto t = transmission_spectrum(eps, optics);
    const auto b = transmission_spectrum(baseline, optics);
    for (std::size_t k = 0; k < t.size(); ++k) {
        t[k] /= b[k];
    }
    return t;
}

EchoWindow EchoTrace::window(int order) const
{
    require(frep_mhz > 0.0, "echo windows need a positive repetition rate");
    require(order >= 1, "echo order starts at 1");
    const double period = 1.0 / frep_mhz;
    EchoWindow w;
    w.order = order;
    w.start_us = pulse_center_us + (order - 0.3) * period;
    w.stop_us = pulse_center_us + (order + 0.3) * period;
    return w;
}

EchoMeasurement echo_energy(const EchoTrace& trace, int order)
{
    require(trace.input_energy > 0.0, "input pulse energy must be positive");
    const EchoWindow w = trace.window(order);
    const Waveform& out = trace.output;

    EchoMeasurement m;
    m.flagged = w.start_us - trace.pulse_center_us < 2.0 * trace.pulse_fwhm_ns * 1e-3;
    double best = -1.0;
    double e = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double t = out.time(n);
        if (t < w.start_us || t >= w.stop_us) {
            continue;
        }
        const double p = std::norm(out.u[n]);
        e += p;
        if (p > best) {
            best = p;
            m.peak_us = t - trace.pulse_center_us;
        }
    }
    if (best < 0.0 || w.stop_us > out.time(out.size() - 1) + out.dt_us) {
        m.flagged = true; // window falls outside the kept trace
    }
    m.energy = e * out.dt_us / trace.input_energy;
    return m;
}

double pearson_r(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    require(a.rows() == b.rows() && a.cols() == b.cols(), "maps must share one grid");
    require(a.size() >= 2, "maps need at least two points");
    const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
    const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
    const double sxx = x.square().sum();
    const double syy = y.square().sum();
    require_numerics(sxx > 0.0 && syy > 0.0, "correlation of a zero-variance map is undefined");
    return (x * y).sum() / std::sqrt(sxx * syy);
}

ShuffleBaseline shuffle_baseline(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int shuffles,
                                 std::uint64_t seed)
{
    require(shuffles > 0, "need at least one shuffle");
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd p = b;
    ShuffleBaseline s;
    for (int k = 0; k < shuffles; ++k) {
        std::shuffle(p.data(), p.data() + p.size(), rng);
        const double r = pearson_r(a, p);
        s.mean_r2 += r * r / shuffles;
        s.max_r2 = std::max(s.max_r2, r * r);
    }
    return s;
}

} // namespace afc::propagation
