#pragma once

#include <cstdint>
#include <vector>

#include "afc/dielectric.hpp"

namespace afc::propagation {

/// Complex envelope on a uniform time grid, t_n = t0 + n dt (microseconds).
struct Waveform {
    double t0_us = 0.0;
    double dt_us = 1e-3;
    std::vector<Complex> u;

    double time(std::size_t n) const { return t0_us + static_cast<double>(n) * dt_us; }
    double energy() const;
    std::size_t size() const { return u.size(); }
};

/// Unit-peak Gaussian envelope whose |U| has the given FWHM; its spectrum
/// |FFT(U)| then has FWHM 4 ln2 / (pi fwhm), i.e. 88.3 MHz for 10 ns.
Waveform gaussian_pulse(double fwhm_ns, double center_us, std::size_t points, double dt_us);

/// FWHM (MHz) of |FFT(u)|.
double spectral_fwhm_mhz(const Waveform& w);

struct PropagationOptions {
    double carrier_offset_mhz = 0.0; // probe carrier relative to the grid center
    double keep_us = 10.0;           // output span kept from the start of the grid
};

/// U1 = IFFT{FFT[U0] exp(i (n - 1) k z)}, with the grid frequency step equal
/// to the dielectric grid step. The constant exp(i k z) is dropped, and the
/// periodic tail of the FFT window is discarded.
Waveform propagate(const Waveform& pulse,
                   const dielectric::DielectricSpectrum& eps,
                   const dielectric::Optics& optics,
                   const PropagationOptions& options = {});

/// exp(-2 n2 k z) at every grid point; with a baseline, divided by it.
std::vector<double> transmission_spectrum(const dielectric::DielectricSpectrum& eps,
                                          const dielectric::Optics& optics);
std::vector<double> transmission_spectrum(const dielectric::DielectricSpectrum& eps,
                                          const dielectric::DielectricSpectrum& baseline,
                                          const dielectric::Optics& optics);

struct EchoWindow {
    int order = 0;
    double start_us = 0.0;
    double stop_us = 0.0;
};

/// Output trace with the input-pulse time and the echo windows
/// [N/f - 0.3/f, N/f + 0.3/f] (relative to the pulse center).
struct EchoTrace {
    Waveform output;
    double pulse_center_us = 0.0;
    double pulse_fwhm_ns = 10.0;
    double input_energy = 0.0;
    double frep_mhz = 0.0;

    EchoWindow window(int order) const;
};

struct EchoMeasurement {
    double energy = 0.0;  // normalized to the input pulse energy
    double peak_us = 0.0; // peak time relative to the pulse center
    bool flagged = false; // window overlaps the transmitted input pulse
};

EchoMeasurement echo_energy(const EchoTrace& trace, int order);

/// Pearson correlation of two maps of identical shape (flattened).
double pearson_r(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Mean and max r^2 of `a` against `shuffles` random permutations of `b`.
struct ShuffleBaseline {
    double mean_r2 = 0.0;
    double max_r2 = 0.0;
};

ShuffleBaseline shuffle_baseline(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int shuffles,
                                 std::uint64_t seed);

} // namespace afc::propagation
