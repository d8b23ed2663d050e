#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace afc {

using Complex = std::complex<double>;

// Units used throughout: frequencies in MHz, times in microseconds, so that
// 2*pi*f*t is a phase in radians.
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPi = std::numbers::pi;

/// Invalid user input or configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical precondition or invariant was violated (maps to exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) {
        throw ConfigError(message);
    }
}

inline void require_numerics(bool condition, const std::string& message)
{
    if (!condition) {
        throw NumericalError(message);
    }
}

/// Wraps an angle in degrees to (-180, 180].
double wrap_degrees(double angle);

/// Full width at half maximum of a sampled, single-peaked non-negative curve,
/// located around the sample with maximal value (linear interpolation at the
/// half-maximum crossings). Returns 0 if the curve never drops below half.
double measure_fwhm(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Runs task(k) for every k in [0, count) on `workers` threads (0: one per
/// hardware thread). Each index runs exactly once; the first exception thrown
/// is rethrown after all workers stop.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task);

int resolve_workers(int workers);

} // namespace afc
