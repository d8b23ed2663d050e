#include "afc/synthetic.hpp"

#include <cmath>
#include <random>

namespace afc::synthetic {

void TriangleFm::validate() const
{
    require(frep_mhz > 0.0, "modulation frequency must be positive");
    require(deviation_mhz >= 0.0, "FM deviation must be non-negative");
    require(step_us > 0.0 && duration_us > step_us, "record step and duration must be positive");
    require(carrier_mhz - deviation_mhz > 0.0, "carrier must exceed the deviation");
    require(carrier_mhz + deviation_mhz < 0.5 / step_us, "record step does not resolve the highest frequency");
}

double triangle(double x)
{
    const double u = x - std::floor(x);
    return u < 0.5 ? 4.0 * u - 1.0 : 3.0 - 4.0 * u;
}

double triangle_frequency(const TriangleFm& p, double t_us)
{
    return p.deviation_mhz * triangle(t_us * p.frep_mhz);
}

double triangle_phase(const TriangleFm& p, double t_us)
{
    // int_0^u tri over one period vanishes; integrate the remainder piecewise
    const double period = 1.0 / p.frep_mhz;
    const double u = t_us * p.frep_mhz - std::floor(t_us * p.frep_mhz);
    const double integral = u < 0.5 ? 2.0 * u * u - u : (u - 0.5) - 2.0 * (u - 0.5) * (u - 0.5);
    return kTwoPi * p.deviation_mhz * period * integral;
}

sigavg::HeterodyneRecord generate_record(const TriangleFm& p)
{
    p.validate();
    sigavg::HeterodyneRecord r;
    r.step_us = p.step_us;
    r.frep_mhz = p.frep_mhz;
    const auto n = static_cast<std::size_t>(std::llround(p.duration_us / p.step_us));
    r.samples.resize(n);

    double sigma = 0.0;
    if (p.snr_db > 0.0) {
        sigma = std::sqrt(0.5 * p.amplitude * p.amplitude / std::pow(10.0, p.snr_db / 10.0));
    }
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * p.step_us;
        const double carrier = std::fmod(p.carrier_mhz * t, 1.0);
        r.samples[k] = p.amplitude * std::cos(kTwoPi * carrier + triangle_phase(p, t) + p.phase0);
        if (sigma > 0.0) {
            r.samples[k] += sigma * noise(rng);
        }
    }
    return r;
}

std::vector<Complex> ideal_envelope(const TriangleFm& p, std::size_t samples)
{
    const double period = 1.0 / p.frep_mhz;
    std::vector<Complex> e(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = period * static_cast<double>(k) / static_cast<double>(samples);
        e[k] = std::polar(1.0, triangle_phase(p, t));
    }
    return e;
}

} // namespace afc::synthetic
