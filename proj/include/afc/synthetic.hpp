#pragma once

#include <cstdint>

#include "afc/sigavg.hpp"

namespace afc::synthetic {

/// Triangle-wave FM heterodyne record: instantaneous frequency
/// carrier + deviation * tri(t f_rep), with tri running -1 -> +1 -> -1 over a
/// period (minimum at t = 0).
struct TriangleFm {
    double frep_mhz = 4.8;
    double carrier_mhz = 200.0;
    double deviation_mhz = 60.0; // half the comb span
    double step_us = 2e-4;
    double duration_us = 20.0;
    double amplitude = 1.0;
    double snr_db = 0.0;      // additive white Gaussian noise; <= 0 disables
    std::uint64_t seed = 1;
    double phase0 = 0.0;      // carrier phase at t = 0

    void validate() const;
};

/// tri(x) in [-1, 1], period 1, tri(0) = -1, tri(1/2) = 1.
double triangle(double x);

/// Frequency offset from the carrier at time t.
double triangle_frequency(const TriangleFm& p, double t_us);

/// Accumulated FM phase 2 pi * int_0^t (f - carrier), exact; zero per period.
double triangle_phase(const TriangleFm& p, double t_us);

sigavg::HeterodyneRecord generate_record(const TriangleFm& p);

/// The ideal one-period baseband envelope exp(i phase) at `samples` points,
/// in the record convention (same sense as AveragedPeriodicSignal::samples).
std::vector<Complex> ideal_envelope(const TriangleFm& p, std::size_t samples);

} // namespace afc::synthetic
