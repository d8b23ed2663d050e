#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "afc/burn.hpp"

namespace afc::dielectric {

/// Uniform detuning grid Delta_n = (n - N/2) * step.
struct Grid {
    std::size_t points = std::size_t{1} << 20;
    double step_mhz = 0.05;

    double detuning(std::size_t n) const
    {
        return (static_cast<double>(n) - static_cast<double>(points / 2)) * step_mhz;
    }
    double span_mhz() const { return static_cast<double>(points) * step_mhz; }
    /// Index of an on-grid detuning; rejects detunings between samples.
    std::size_t index_of(double detuning_mhz) const;
};

/// Resonances of one ion class relative to its lowest transition.
struct IonLines {
    Eigen::Matrix3d strengths;                  // f_ij (ground i, excited j)
    std::array<std::array<double, 3>, 3> offset; // Delta0_ij, MHz

    static IonLines from_ion(const lindblad::IonModel& ion);
};

struct MediumModel {
    IonLines lines;
    double gamma_mhz = 0.1;
    double sigma_inh_mhz = 1869.0;
};

/// alpha_i(Delta) = sum_j f_ij / (Delta0_ij - Delta - i gamma), in units of f0.
Complex polarizability(const MediumModel& model, int level, double detuning_mhz);

/// Per-level kernels sampled at lags m * step, m in [-N/2, N/2), stored at
/// index m + N/2. Each resonance is summed over its periodic images (spacing
/// N * step), which is what a circular convolution needs to equal the linear
/// one for band-limited densities.
struct PolarizabilityKernel {
    Grid grid;
    std::array<std::vector<Complex>, 3> alpha;
    std::array<std::vector<Complex>, 3> transformed; // DFT of alpha in wrapped lag order
    bool undersampled = false; // gamma below the grid step
};

PolarizabilityKernel polarizability_kernel(const MediumModel& model, const Grid& grid);

/// Absolute ion density per ground level: unit-area Gaussian of width
/// sigma_inh times the burned fractions (1/3 each outside the burn band).
std::array<std::vector<double>, 3> apply_inhomogeneous_envelope(const burn::PopulationGrid& populations,
                                                                const MediumModel& model,
                                                                const Grid& grid);

/// B_i(Delta) = step * sum_n rho_i(Delta_n) alpha_i(Delta - Delta_n), by FFT.
std::array<std::vector<Complex>, 3> convolve_band(const PolarizabilityKernel& kernel,
                                                  const std::array<std::vector<double>, 3>& densities);

/// Sum of B_i over levels (one inverse transform).
std::vector<Complex> convolve_band_sum(const PolarizabilityKernel& kernel,
                                       const std::array<std::vector<double>, 3>& densities);

/// epsilon - 1 on the grid.
struct DielectricSpectrum {
    Grid grid;
    std::vector<Complex> eps_minus_1;

    Complex at_center() const { return eps_minus_1[grid.points / 2]; }
};

/// Solves 3(eps - 1)/(eps + 2) = scale * S for eps. Rejects S near 3.
DielectricSpectrum clausius_mossotti(const std::vector<Complex>& sum_b, double scale, const Grid& grid);
Complex clausius_mossotti(Complex s);

enum class WavevectorConvention { Vacuum, Medium };

struct Optics {
    double wavelength_nm = 605.977;
    double length_mm = 10.0;
    double background_index = 1.8;
    WavevectorConvention convention = WavevectorConvention::Vacuum;

    /// k = 2 pi / lambda (vacuum) or 2 pi n_bkg / lambda (medium), in 1/m.
    double wavevector() const;
    double kz() const { return wavevector() * length_mm * 1e-3; }
};

/// Imaginary part of the refractive index sqrt(eps).
double n2(Complex eps_minus_1);

/// Intensity attenuation through the crystal, in dB (positive = loss).
double attenuation_db(Complex eps_minus_1, const Optics& optics);

struct Calibration {
    double scale = 0.0;      // multiplies sum B_i before Clausius-Mossotti
    double n2_center = 0.0;  // of the unburned crystal
    double target_db = 9.9;
};

/// Scale such that the unburned crystal attenuates `target_db` at the center.
Calibration calibrate(Complex unburned_center_sum_b, double target_db, const Optics& optics);

/// Convenience: populations -> calibrated spectrum.
DielectricSpectrum build_spectrum(const burn::PopulationGrid& populations,
                                  const PolarizabilityKernel& kernel,
                                  const MediumModel& model,
                                  const Calibration& calibration);

/// sum B_i at the grid center for the unburned crystal.
Complex unburned_center_sum(const PolarizabilityKernel& kernel, const MediumModel& model);

/// Kramers-Kronig partner of a sampled imaginary part: the causal complex
/// response whose imaginary part is `imaginary` (periodic grid, zero-mean
/// real part).
std::vector<Complex> causal_completion(const std::vector<double>& imaginary);

} // namespace afc::dielectric
