#pragma once

#include <array>
#include <vector>

#include "afc/lindblad.hpp"

namespace afc::sigavg {

/// Real heterodyne samples x_k at t_k = k * step.
struct HeterodyneRecord {
    double step_us = 2e-4;
    double frep_mhz = 0.0; // nominal modulation frequency
    std::vector<double> samples;

    double duration_us() const { return step_us * static_cast<double>(samples.size()); }
    void validate() const;
};

/// (1, 6, 15, 20, 15, 6, 1) / 64
std::array<double, 7> binomial_kernel();

/// Mean removal followed by the 7-point binomial filter; the ends are
/// mirrored about the first and last samples.
std::vector<double> smooth(const std::vector<double>& x);

/// Linearly interpolated zero-crossing times (us). A crossing immediately
/// followed by another one in the next step is dropped together with it.
std::vector<double> zero_crossings(const std::vector<double>& x, double step_us);

struct FrequencySample {
    double t_us = 0.0;
    double f_mhz = 0.0;
};

/// f = (1 / 2 pi) (pi / dt) between adjacent crossings, stamped at their midpoint.
std::vector<FrequencySample> instantaneous_frequency(const std::vector<double>& x, double step_us);

/// Frequency estimates linearly interpolated onto the sample grid t_k = k step
/// (held constant beyond the first and last estimate).
std::vector<double> resample_frequency(const std::vector<FrequencySample>& f, std::size_t count, double step_us);

struct StroboscopicAverage {
    std::vector<double> values; // one period, bin b at t = b * period / bins
    std::size_t empty_bins = 0;
    double empty_fraction = 0.0;
    std::size_t periods = 0; // whole periods covered
};

/// Averages x_k (t_k = (first + k) * step) into `bins` bins by phase within
/// `period_us`, nearest bin; empty bins are filled by periodic linear
/// interpolation. Rejects more than 10% empty bins.
StroboscopicAverage stroboscopic_average(const std::vector<double>& x,
                                         double step_us,
                                         double period_us,
                                         std::size_t bins,
                                         std::size_t first = 0);

/// FFT, zero the negative frequencies, double the positive ones, inverse FFT.
std::vector<Complex> analytic_signal(const std::vector<double>& x);
std::vector<double> envelope(const std::vector<double>& x);

struct AveragingOptions {
    double edge_margin = 0.05; // fraction discarded at each end
    int downsample = 5;
    double max_empty_fraction = 0.10;
};

struct AveragingQa {
    double empty_fraction = 0.0;
    double endpoint_phase_error = 0.0; // rad, after the linear adjustment
    double frequency_shift_mhz = 0.0;  // applied to make the phase periodic
    double carrier_mhz = 0.0;          // removed central frequency
    std::size_t crossings = 0;
    std::size_t periods = 0;
};

/// One strictly periodic complex envelope, baseband, tone at +nu = exp(+2 pi i nu t)
/// in the record's own (RF) convention.
struct AveragedPeriodicSignal {
    double period_us = 0.0;
    double step_us = 0.0;              // period / samples.size()
    std::vector<Complex> samples;
    std::vector<double> frequency_mhz; // averaged instantaneous frequency minus the carrier, record step
    std::vector<double> amplitude;     // averaged envelope, record step
    AveragingQa qa;

    /// Drive for the ion model: conjugated (optical tone at +nu is
    /// exp(-2 pi i nu t)) and scaled to unit RMS.
    lindblad::PeriodicDrive drive(double rabi_strength, double center_detuning_mhz = 0.0) const;
};

AveragedPeriodicSignal assemble_periodic_signal(const HeterodyneRecord& record, const AveragingOptions& options = {});

} // namespace afc::sigavg
