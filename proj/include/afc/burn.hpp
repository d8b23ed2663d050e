#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "afc/lindblad.hpp"

namespace afc::burn {

struct BurnPlan {
    double band_center_mhz = 0.0;
    double span_mhz = 350.0;
    double step_mhz = 0.05;
    double burn_duration_s = 30.0;
    double post_burn_delay_s = 0.010;
    double rabi_strength = 0.0125;
    double dt_target_us = 1e-3;
    int workers = 0; // 0: hardware concurrency

    /// Odd point count, symmetric about the band center.
    std::size_t points() const;
    double detuning(std::size_t k) const;
    void validate() const;

    /// Desk-scale variant: 0.3 s burn over 130 MHz (2601 points), just wider
    /// than the 120 MHz comb so the probe sees the whole burned band.
    static BurnPlan fast();
};

struct PointQa {
    double min_eigenvalue = 0.0;
    double trace_error = 0.0;
    double excited_left = 0.0; // excited population remaining after the delay
    bool flagged = false;
};

/// Ground-level fractions (levels 1/2, 3/2, 5/2) per detuning of the class's
/// lowest transition.
struct PopulationGrid {
    std::vector<double> detuning_mhz;
    std::vector<std::array<double, 3>> fractions;
    std::vector<PointQa> qa;

    std::size_t size() const { return detuning_mhz.size(); }
    double step_mhz() const;
    std::size_t flagged() const;

    /// Undisturbed (1/3, 1/3, 1/3) grid.
    static PopulationGrid unburned(const BurnPlan& plan);
};

/// Evolve sigma0 = diag(1/3, 1/3, 1/3, 0, 0, 0) under the periodic drive for
/// the burn duration at every grid detuning, then let it relax drive-free.
/// Points run in parallel; the result does not depend on the schedule.
PopulationGrid burn_afc(const BurnPlan& plan,
                        const lindblad::PeriodicDrive& drive,
                        const lindblad::IonModel& ion);

} // namespace afc::burn
