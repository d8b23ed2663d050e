#include "afc/burn.hpp"

#include <cmath>

namespace afc::burn {

std::size_t BurnPlan::points() const
{
    const double intervals = span_mhz / step_mhz;
    return static_cast<std::size_t>(std::llround(intervals)) + 1;
}

double BurnPlan::detuning(std::size_t k) const
{
    const auto half = static_cast<double>((points() - 1) / 2);
    return band_center_mhz + (static_cast<double>(k) - half) * step_mhz;
}

void BurnPlan::validate() const
{
    require(step_mhz > 0.0, "burn grid step must be positive");
    require(span_mhz >= 0.0, "burn span must be non-negative");
    const double intervals = span_mhz / step_mhz;
    require(std::abs(intervals - std::round(intervals)) < 1e-9 * std::max(1.0, intervals),
            "burn grid step must divide the span");
    require(points() % 2 == 1, "burn grid must have an odd number of points");
    require(burn_duration_s >= 0.0, "burn duration must be non-negative");
    require(post_burn_delay_s >= 0.0, "post-burn delay must be non-negative");
    require(rabi_strength >= 0.0, "Rabi strength must be non-negative");
    require(dt_target_us > 0.0, "time step must be positive");
}

BurnPlan BurnPlan::fast()
{
    BurnPlan plan;
    plan.span_mhz = 130.0;
    plan.burn_duration_s = 0.3;
    return plan;
}

double PopulationGrid::step_mhz() const
{
    if (detuning_mhz.size() < 2) {
        return 0.0;
    }
    return (detuning_mhz.back() - detuning_mhz.front()) / static_cast<double>(detuning_mhz.size() - 1);
}

std::size_t PopulationGrid::flagged() const
{
    std::size_t n = 0;
    for (const auto& q : qa) {
        n += q.flagged ? 1 : 0;
    }
    return n;
}

PopulationGrid PopulationGrid::unburned(const BurnPlan& plan)
{
    plan.validate();
    PopulationGrid grid;
    const std::size_t n = plan.points();
    grid.detuning_mhz.resize(n);
    grid.fractions.assign(n, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    grid.qa.assign(n, PointQa{});
    for (std::size_t k = 0; k < n; ++k) {
        grid.detuning_mhz[k] = plan.detuning(k);
    }
    return grid;
}

PopulationGrid burn_afc(const BurnPlan& plan, const lindblad::PeriodicDrive& drive, const lindblad::IonModel& ion)
{
    using namespace lindblad;
    plan.validate();

    PeriodicDrive scaled = drive;
    scaled.rabi_strength = plan.rabi_strength;
    PropagatorOptions options;
    options.dt_target_us = plan.dt_target_us;
    const PropagatorEngine engine(ion, scaled, options);

    const auto periods = static_cast<std::uint64_t>(std::llround(plan.burn_duration_s * 1e6 / scaled.period_us));
    const RealSuper relax = free_evolution(ion, plan.post_burn_delay_s * 1e6, plan.dt_target_us);

    Mat6 sigma0 = Mat6::Zero();
    sigma0(0, 0) = sigma0(1, 1) = sigma0(2, 2) = 1.0 / 3.0;
    const RealVec36 x0 = to_coords(sigma0);

    PopulationGrid grid = PopulationGrid::unburned(plan);
    parallel_for(grid.size(), plan.workers, [&](std::size_t k) {
        const RealSuper q = engine.period_propagator(grid.detuning_mhz[k]).corrected();
        const RealVec36 x = relax * (power_propagator(q, periods) * x0);
        const Mat6 sigma = from_coords(x);
        const auto check = check_state(sigma);

        PointQa qa;
        qa.min_eigenvalue = check.min_eigenvalue;
        qa.trace_error = check.trace_error;
        qa.excited_left = sigma.diagonal().tail<3>().real().sum();
        qa.flagged = check.min_eigenvalue < -1e-7 || check.trace_error > 1e-8;

        const Eigen::Vector3d ground = sigma.diagonal().head<3>().real();
        const double total = ground.sum();
        for (int i = 0; i < 3; ++i) {
            grid.fractions[k][i] = ground[i] / total;
        }
        grid.qa[k] = qa;
    });
    return grid;
}

} // namespace afc::burn
