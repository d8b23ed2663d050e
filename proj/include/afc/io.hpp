#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "afc/burn.hpp"
#include "afc/dielectric.hpp"
#include "afc/propagation.hpp"
#include "afc/sigavg.hpp"

namespace afc::io {

namespace fs = std::filesystem;

/// Writes through a temporary sibling and renames it into place.
void write_atomic(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

/// Minimal CSV: '#' comment lines skipped, first remaining line is the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const; // throws ConfigError naming the column
    std::vector<double> numbers(const std::string& name) const;
};

Table read_csv(const fs::path& path);

/// %.17g round-trippable number formatting.
std::string num(double x);

/// Rows g12, g32, g52; columns e12, e32, e52.
Eigen::Matrix3d read_strength_table(const fs::path& path);

// populations.csv: detuning_mhz, pop_g12, pop_g32, pop_g52
std::string format_populations(const burn::PopulationGrid& grid);
burn::PopulationGrid read_populations(const fs::path& path);

// epsilon.csv: detuning_mhz, re_eps_minus_1, im_eps_minus_1, over [-W, W) around the center
std::string format_epsilon(const dielectric::DielectricSpectrum& eps, double half_window_mhz);
/// The window as a spectrum of its own (grid centered on the window).
dielectric::DielectricSpectrum read_epsilon(const fs::path& path);

// transmission.csv: detuning_mhz, transmission, transmission_db
std::string format_transmission(const dielectric::Grid& grid,
                                const std::vector<double>& transmission,
                                double half_window_mhz);

// echo.csv: time_us, re_u, im_u, abs2_u
std::string format_echo(const propagation::Waveform& w);

// record.csv: sample  (+ JSON sidecar record.json: step_us, duration_us, frep_mhz)
void write_record(const fs::path& csv, const sigavg::HeterodyneRecord& record);
/// Reads the sidecar next to `csv` when present; explicit values override it.
sigavg::HeterodyneRecord read_record(const fs::path& csv, double frep_mhz = 0.0, double step_us = 0.0);

// drive.json: period_us, step_us, re, im, qa
std::string format_drive(const sigavg::AveragedPeriodicSignal& signal);
sigavg::AveragedPeriodicSignal read_drive(const fs::path& path);

} // namespace afc::io
