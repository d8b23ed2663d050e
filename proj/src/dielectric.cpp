#include "afc/dielectric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "afc/fft.hpp"

namespace afc::dielectric {

namespace {

// (pi/L) cot(pi z / L) = sum over p of 1 / (z + p L)
Complex periodic_pole(Complex z, double period)
{
    const Complex w = kPi * z / period;
    return (kPi / period) * std::cos(w) / std::sin(w);
}

std::vector<Complex> wrapped_lags(const std::vector<Complex>& alpha)
{
    const std::size_t n = alpha.size();
    std::vector<Complex> c(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        // lag m = idx for the first half, idx - n for the second
        const std::size_t stored = idx < n / 2 ? idx + n / 2 : idx - n / 2;
        c[idx] = alpha[stored];
    }
    return c;
}

std::vector<Complex> transformed_density(const std::vector<double>& rho)
{
    std::vector<Complex> d(rho.begin(), rho.end());
    fft::forward(d);
    return d;
}

void check_grid(const PolarizabilityKernel& kernel, const std::array<std::vector<double>, 3>& densities)
{
    for (const auto& rho : densities) {
        require(rho.size() == kernel.grid.points, "density and kernel grids differ");
    }
}

} // namespace

std::size_t Grid::index_of(double detuning_mhz) const
{
    const double x = detuning_mhz / step_mhz + static_cast<double>(points / 2);
    const double n = std::round(x);
    require(std::abs(x - n) < 1e-6, "detuning is not on the dielectric grid");
    require(n >= 0.0 && n < static_cast<double>(points), "detuning outside the dielectric grid");
    return static_cast<std::size_t>(n);
}

IonLines IonLines::from_ion(const lindblad::IonModel& ion)
{
    IonLines lines;
    lines.strengths = ion.amplitudes.cwiseAbs2();
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            lowest = std::min(lowest, ion.excited_mhz[j] - ion.ground_mhz[i]);
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            lines.offset[i][j] = ion.excited_mhz[j] - ion.ground_mhz[i] - lowest;
        }
    }
    return lines;
}

Complex polarizability(const MediumModel& model, int level, double detuning_mhz)
{
    Complex a = 0.0;
    for (int j = 0; j < 3; ++j) {
        a += model.lines.strengths(level, j)
            / Complex(model.lines.offset[level][j] - detuning_mhz, -model.gamma_mhz);
    }
    return a;
}

PolarizabilityKernel polarizability_kernel(const MediumModel& model, const Grid& grid)
{
    require(model.gamma_mhz > 0.0, "linewidth gamma must be positive");
    require(grid.points >= 2 && grid.points % 2 == 0, "grid needs an even number of points");
    PolarizabilityKernel kernel;
    kernel.grid = grid;
    kernel.undersampled = model.gamma_mhz < grid.step_mhz;
    const double period = grid.span_mhz();
    const auto half = static_cast<long>(grid.points / 2);
    for (int i = 0; i < 3; ++i) {
        auto& alpha = kernel.alpha[i];
        alpha.resize(grid.points);
        for (long m = -half; m < half; ++m) {
            const double lag = static_cast<double>(m) * grid.step_mhz;
            Complex a = 0.0;
            for (int j = 0; j < 3; ++j) {
                const Complex z(model.lines.offset[i][j] - lag, -model.gamma_mhz);
                a += model.lines.strengths(i, j) * periodic_pole(z, period);
            }
            alpha[static_cast<std::size_t>(m + half)] = a;
        }
        kernel.transformed[i] = wrapped_lags(alpha);
        fft::forward(kernel.transformed[i]);
    }
    return kernel;
}

std::array<std::vector<double>, 3> apply_inhomogeneous_envelope(const burn::PopulationGrid& populations,
                                                                const MediumModel& model,
                                                                const Grid& grid)
{
    require(model.sigma_inh_mhz > 0.0, "inhomogeneous width must be positive");
    const double sigma = model.sigma_inh_mhz;
    const double norm = 1.0 / (sigma * std::sqrt(kTwoPi));
    const double edge = grid.detuning(0) / sigma;
    require_numerics(std::exp(-0.5 * edge * edge) < 1e-12, "inhomogeneous band does not decay at the grid edges");

    std::array<std::vector<double>, 3> rho;
    for (auto& r : rho) {
        r.resize(grid.points);
    }
    for (std::size_t n = 0; n < grid.points; ++n) {
        const double x = grid.detuning(n) / sigma;
        const double g = norm * std::exp(-0.5 * x * x) / 3.0;
        rho[0][n] = rho[1][n] = rho[2][n] = g;
    }
    if (populations.size() == 0) {
        return rho;
    }
    if (populations.size() > 1) {
        require(std::abs(populations.step_mhz() - grid.step_mhz) < 1e-9 * grid.step_mhz,
                "population grid step differs from the dielectric grid step");
    }
    const std::size_t first = grid.index_of(populations.detuning_mhz.front());
    require(first + populations.size() <= grid.points, "population grid extends past the dielectric grid");
    for (std::size_t k = 0; k < populations.size(); ++k) {
        const std::size_t n = first + k;
        const double x = grid.detuning(n) / sigma;
        const double g = norm * std::exp(-0.5 * x * x);
        for (int i = 0; i < 3; ++i) {
            rho[i][n] = g * populations.fractions[k][i];
        }
    }
    return rho;
}

std::array<std::vector<Complex>, 3> convolve_band(const PolarizabilityKernel& kernel,
                                                  const std::array<std::vector<double>, 3>& densities)
{
    check_grid(kernel, densities);
    std::array<std::vector<Complex>, 3> b;
    for (int i = 0; i < 3; ++i) {
        b[i] = transformed_density(densities[i]);
        for (std::size_t k = 0; k < b[i].size(); ++k) {
            b[i][k] *= kernel.transformed[i][k] * kernel.grid.step_mhz;
        }
        fft::inverse(b[i]);
    }
    return b;
}

std::vector<Complex> convolve_band_sum(const PolarizabilityKernel& kernel,
                                       const std::array<std::vector<double>, 3>& densities)
{
    check_grid(kernel, densities);
    std::vector<Complex> total(kernel.grid.points, Complex(0.0, 0.0));
    for (int i = 0; i < 3; ++i) {
        const auto d = transformed_density(densities[i]);
        for (std::size_t k = 0; k < total.size(); ++k) {
            total[k] += d[k] * kernel.transformed[i][k];
        }
    }
    for (auto& x : total) {
        x *= kernel.grid.step_mhz;
    }
    fft::inverse(total);
    return total;
}

Complex clausius_mossotti(Complex s)
{
    const Complex denominator = 1.0 - s / 3.0;
    require_numerics(std::abs(denominator) > 0.1,
                     "Clausius-Mossotti sum approaches 3 (polarization catastrophe); density or strength unphysical");
    // (1 + 2S/3) / (1 - S/3) - 1, written without cancellation
    return s / denominator;
}

DielectricSpectrum clausius_mossotti(const std::vector<Complex>& sum_b, double scale, const Grid& grid)
{
    require(sum_b.size() == grid.points, "susceptibility sum and grid sizes differ");
    DielectricSpectrum spectrum;
    spectrum.grid = grid;
    spectrum.eps_minus_1.resize(sum_b.size());
    for (std::size_t n = 0; n < sum_b.size(); ++n) {
        spectrum.eps_minus_1[n] = clausius_mossotti(scale * sum_b[n]);
    }
    return spectrum;
}

double Optics::wavevector() const
{
    require(wavelength_nm > 0.0 && length_mm > 0.0, "wavelength and length must be positive");
    const double k = kTwoPi / (wavelength_nm * 1e-9);
    return convention == WavevectorConvention::Medium ? k * background_index : k;
}

double n2(Complex eps_minus_1)
{
    return std::sqrt(Complex(1.0, 0.0) + eps_minus_1).imag();
}

double attenuation_db(Complex eps_minus_1, const Optics& optics)
{
    return 20.0 * n2(eps_minus_1) * optics.kz() / std::log(10.0);
}

Calibration calibrate(Complex unburned_center_sum_b, double target_db, const Optics& optics)
{
    require(target_db > 0.0, "calibration target must be a positive attenuation");
    require(unburned_center_sum_b.imag() > 0.0, "reference crystal has no absorption to calibrate against");

    const double wanted = target_db * std::log(10.0) / (20.0 * optics.kz());
    auto mismatch = [&](double scale) { return n2(clausius_mossotti(scale * unburned_center_sum_b)) - wanted; };

    double lo = 0.0;
    double hi = 2.0 * wanted / unburned_center_sum_b.imag();
    for (int k = 0; k < 60 && mismatch(hi) < 0.0; ++k) {
        lo = hi;
        hi *= 2.0;
    }
    for (int k = 0; k < 200 && hi - lo > 1e-16 * hi; ++k) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) < 0.0 ? lo : hi) = mid;
    }
    Calibration c;
    c.scale = 0.5 * (lo + hi);
    c.n2_center = n2(clausius_mossotti(c.scale * unburned_center_sum_b));
    c.target_db = target_db;
    return c;
}

DielectricSpectrum build_spectrum(const burn::PopulationGrid& populations,
                                  const PolarizabilityKernel& kernel,
                                  const MediumModel& model,
                                  const Calibration& calibration)
{
    const auto rho = apply_inhomogeneous_envelope(populations, model, kernel.grid);
    return clausius_mossotti(convolve_band_sum(kernel, rho), calibration.scale, kernel.grid);
}

Complex unburned_center_sum(const PolarizabilityKernel& kernel, const MediumModel& model)
{
    const auto rho = apply_inhomogeneous_envelope(burn::PopulationGrid{}, model, kernel.grid);
    return convolve_band_sum(kernel, rho)[kernel.grid.points / 2];
}

std::vector<Complex> causal_completion(const std::vector<double>& imaginary)
{
    // a response analytic in the upper half plane has its transform on k > 0 only
    const std::size_t n = imaginary.size();
    std::vector<Complex> f(n);
    for (std::size_t k = 0; k < n; ++k) {
        f[k] = Complex(0.0, imaginary[k]);
    }
    fft::forward(f);
    for (std::size_t k = 1; k < n; ++k) {
        if (k < (n + 1) / 2) {
            f[k] *= 2.0;
        } else if (2 * k != n) {
            f[k] = 0.0;
        }
    }
    fft::inverse(f);
    return f;
}

} // namespace afc::dielectric
