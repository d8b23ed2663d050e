#include "afc/sigavg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "afc/fft.hpp"

namespace afc::sigavg {

void HeterodyneRecord::validate() const
{
    require(step_us > 0.0, "record step must be positive");
    require(frep_mhz > 0.0, "record needs a positive nominal modulation frequency");
    require(samples.size() >= 7, "record shorter than the smoothing filter");
    for (double x : samples) {
        require(std::isfinite(x), "record contains non-finite samples");
    }
}

std::array<double, 7> binomial_kernel()
{
    return {1.0 / 64, 6.0 / 64, 15.0 / 64, 20.0 / 64, 15.0 / 64, 6.0 / 64, 1.0 / 64};
}

std::vector<double> smooth(const std::vector<double>& x)
{
    const auto n = static_cast<long>(x.size());
    require(n >= 7, "smoothing needs at least 7 samples");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const auto w = binomial_kernel();
    auto at = [&](long i) {
        // mirror without repeating the end sample
        if (i < 0) {
            i = -i;
        } else if (i >= n) {
            i = 2 * (n - 1) - i;
        }
        return x[static_cast<std::size_t>(i)] - mean;
    };
    std::vector<double> y(x.size());
    for (long i = 0; i < n; ++i) {
        double s = 0.0;
        for (long k = -3; k <= 3; ++k) {
            s += w[static_cast<std::size_t>(k + 3)] * at(i + k);
        }
        y[static_cast<std::size_t>(i)] = s;
    }
    return y;
}

std::vector<double> zero_crossings(const std::vector<double>& x, double step_us)
{
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        if ((x[i] < 0.0) != (x[i + 1] < 0.0)) {
            at.push_back(i);
        }
    }
    std::vector<double> t;
    t.reserve(at.size());
    for (std::size_t k = 0; k < at.size(); ++k) {
        const bool before = k > 0 && at[k - 1] + 1 == at[k];
        const bool after = k + 1 < at.size() && at[k] + 1 == at[k + 1];
        if (before || after) {
            continue;
        }
        const std::size_t i = at[k];
        const double frac = x[i] / (x[i] - x[i + 1]);
        t.push_back((static_cast<double>(i) + frac) * step_us);
    }
    return t;
}

std::vector<FrequencySample> instantaneous_frequency(const std::vector<double>& x, double step_us)
{
    const auto t = zero_crossings(x, step_us);
    require_numerics(t.size() >= 2, "fewer than two usable zero crossings");
    std::vector<FrequencySample> f(t.size() - 1);
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
        f[k].t_us = 0.5 * (t[k] + t[k + 1]);
        f[k].f_mhz = 0.5 / (t[k + 1] - t[k]);
    }
    return f;
}

std::vector<double> resample_frequency(const std::vector<FrequencySample>& f, std::size_t count, double step_us)
{
    require(!f.empty(), "no frequency estimates to resample");
    std::vector<double> out(count);
    std::size_t j = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * step_us;
        while (j + 1 < f.size() && f[j + 1].t_us <= t) {
            ++j;
        }
        if (t <= f.front().t_us) {
            out[k] = f.front().f_mhz;
        } else if (j + 1 >= f.size()) {
            out[k] = f.back().f_mhz;
        } else {
            const double u = (t - f[j].t_us) / (f[j + 1].t_us - f[j].t_us);
            out[k] = f[j].f_mhz + u * (f[j + 1].f_mhz - f[j].f_mhz);
        }
    }
    return out;
}

StroboscopicAverage stroboscopic_average(const std::vector<double>& x,
                                         double step_us,
                                         double period_us,
                                         std::size_t bins,
                                         std::size_t first)
{
    require(step_us > 0.0 && period_us > 0.0, "step and period must be positive");
    require(bins >= 2, "need at least two bins per period");
    std::vector<double> sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = static_cast<double>(first + k) * step_us;
        const double phase = std::fmod(t, period_us) / period_us;
        const auto b = static_cast<std::size_t>(std::llround(phase * static_cast<double>(bins))) % bins;
        sum[b] += x[k];
        ++count[b];
    }

    StroboscopicAverage avg;
    avg.values.assign(bins, 0.0);
    avg.periods = static_cast<std::size_t>(std::floor(static_cast<double>(x.size()) * step_us / period_us));
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) {
            ++avg.empty_bins;
        } else {
            avg.values[b] = sum[b] / static_cast<double>(count[b]);
        }
    }
    avg.empty_fraction = static_cast<double>(avg.empty_bins) / static_cast<double>(bins);
    require_numerics(avg.empty_fraction <= 0.10,
                     "more than 10% of stroboscopic bins are empty; period does not match the record");

    if (avg.empty_bins > 0) {
        const auto n = static_cast<long>(bins);
        for (long b = 0; b < n; ++b) {
            if (count[static_cast<std::size_t>(b)] != 0) {
                continue;
            }
            long lo = b;
            long hi = b;
            while (count[static_cast<std::size_t>(((lo % n) + n) % n)] == 0) {
                --lo;
            }
            while (count[static_cast<std::size_t>(hi % n)] == 0) {
                ++hi;
            }
            const double a = avg.values[static_cast<std::size_t>(((lo % n) + n) % n)];
            const double c = avg.values[static_cast<std::size_t>(hi % n)];
            const double u = static_cast<double>(b - lo) / static_cast<double>(hi - lo);
            avg.values[static_cast<std::size_t>(b)] = a + u * (c - a);
        }
    }
    return avg;
}

std::vector<Complex> analytic_signal(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    std::vector<Complex> a(x.begin(), x.end());
    if (n == 0) {
        return a;
    }
    fft::forward(a);
    for (std::size_t k = 1; k < n; ++k) {
        if (2 * k < n) {
            a[k] *= 2.0;
        } else if (2 * k > n) {
            a[k] = 0.0;
        }
    }
    fft::inverse(a);
    return a;
}

std::vector<double> envelope(const std::vector<double>& x)
{
    const auto a = analytic_signal(x);
    std::vector<double> e(a.size());
    std::transform(a.begin(), a.end(), e.begin(), [](Complex z) { return std::abs(z); });
    return e;
}

namespace {

std::vector<Complex> fourier_resample(const std::vector<Complex>& x, std::size_t m)
{
    const std::size_t n = x.size();
    std::vector<Complex> f = x;
    fft::forward(f);
    std::vector<Complex> g(m, Complex(0.0, 0.0));
    const long keep = static_cast<long>(std::min(n, m)) / 2;
    for (long k = -keep; k < keep; ++k) {
        g[fft::bin(k, m)] = f[fft::bin(k, n)];
    }
    fft::inverse(g);
    for (auto& z : g) {
        z *= static_cast<double>(m) / static_cast<double>(n);
    }
    return g;
}

} // namespace

AveragedPeriodicSignal assemble_periodic_signal(const HeterodyneRecord& record, const AveragingOptions& options)
{
    record.validate();
    require(options.downsample >= 1, "downsampling factor must be at least 1");
    require(options.edge_margin >= 0.0 && options.edge_margin < 0.5, "edge margin must lie in [0, 0.5)");

    const double period = 1.0 / record.frep_mhz;
    const auto bins = static_cast<std::size_t>(std::llround(period / record.step_us));
    require(bins >= 2 * static_cast<std::size_t>(options.downsample), "period too short for the record step");
    require(record.duration_us() >= period, "record shorter than one modulation period");

    const std::size_t count = record.samples.size();
    const auto margin = static_cast<std::size_t>(std::floor(options.edge_margin * static_cast<double>(count)));
    auto interior = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(margin),
                                   v.end() - static_cast<std::ptrdiff_t>(margin));
    };

    // steps 1-4
    const auto smoothed = smooth(record.samples);
    const auto estimates = instantaneous_frequency(smoothed, record.step_us);
    const auto f_grid = resample_frequency(estimates, count, record.step_us);
    const auto f_avg = stroboscopic_average(interior(f_grid), record.step_us, period, bins, margin);

    // steps 5-6
    const auto a_avg = stroboscopic_average(interior(envelope(smoothed)), record.step_us, period, bins, margin);

    // step 7: integrate, then enforce a whole number of cycles per period
    const double dt = period / static_cast<double>(bins);
    std::vector<double> phase(bins + 1, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
        phase[b + 1] = phase[b] + kTwoPi * f_avg.values[b] * dt;
    }
    const double total = phase[bins];
    const double cycles = std::round(total / kTwoPi);
    const double residual = total - kTwoPi * cycles;
    const double carrier = cycles / period;

    AveragedPeriodicSignal out;
    out.period_us = period;
    out.qa.empty_fraction = std::max(f_avg.empty_fraction, a_avg.empty_fraction);
    out.qa.frequency_shift_mhz = -residual / (kTwoPi * period);
    out.qa.carrier_mhz = carrier;
    out.qa.crossings = estimates.size() + 1;
    out.qa.periods = f_avg.periods;

    // step 8 with the carrier already taken out (step 9): psi_b = phi_b - 2 pi m b / n
    std::vector<Complex> signal(bins);
    std::vector<double> psi(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        const double u = static_cast<double>(b) / static_cast<double>(bins);
        psi[b] = phase[b] - residual * u - kTwoPi * cycles * u;
    }
    out.qa.endpoint_phase_error = std::abs(psi[bins] - psi[0]);
    out.frequency_mhz.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        signal[b] = std::polar(a_avg.values[b], psi[b]);
        out.frequency_mhz[b] = f_avg.values[b] + out.qa.frequency_shift_mhz - carrier;
    }
    out.amplitude = a_avg.values;

    // step 9: resample to about downsample x the record step; the step divides the period
    const auto n_out = static_cast<std::size_t>(
        std::max<long long>(2, std::llround(static_cast<double>(bins) / options.downsample)));
    out.samples = fourier_resample(signal, n_out);
    out.step_us = period / static_cast<double>(n_out);
    return out;
}

lindblad::PeriodicDrive AveragedPeriodicSignal::drive(double rabi_strength, double center_detuning_mhz) const
{
    require(!samples.empty(), "averaged signal is empty");
    double power = 0.0;
    for (const auto& z : samples) {
        power += std::norm(z);
    }
    power /= static_cast<double>(samples.size());
    require_numerics(power > 0.0, "averaged signal has zero power");
    const double scale = 1.0 / std::sqrt(power);

    lindblad::PeriodicDrive d;
    d.period_us = period_us;
    d.rabi_strength = rabi_strength;
    d.center_detuning_mhz = center_detuning_mhz;
    d.envelope.resize(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        d.envelope[k] = std::conj(samples[k]) * scale;
    }
    return d;
}

} // namespace afc::sigavg
