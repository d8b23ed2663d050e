#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "afc/config.hpp"

namespace afc::orchestrator {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data);

/// Content-addressed store: one file per key under `dir`.
class Cache {
public:
    explicit Cache(fs::path dir);

    /// $AFC_SIM_CACHE_DIR if set, otherwise <output_dir>/cache.
    static Cache for_output(const fs::path& output_dir);

    std::optional<std::string> get(const std::string& name) const;
    void put(const std::string& name, const std::string& content) const;
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
};

struct HamiltonianModel {
    lindblad::IonModel ion;
    std::optional<hyperfine::FitResult> fit; // absent when euler_deg overrides it
    hyperfine::EulerAngles angles;
};

hyperfine::FitResult fit_hamiltonian(const config::RunConfig& c);
HamiltonianModel build_model(const config::RunConfig& c);
lindblad::IonModel ion_from_amplitudes(const config::RunConfig& c, const Eigen::Matrix3d& amplitudes);

/// Calibrated medium: kernel, scale and the unburned baseline spectrum.
struct Medium {
    dielectric::MediumModel model;
    dielectric::PolarizabilityKernel kernel;
    dielectric::Calibration calibration;
    dielectric::DielectricSpectrum baseline;
    dielectric::Optics optics;

    static Medium build(const config::RunConfig& c, const lindblad::IonModel& ion);
};

/// Synthetic triangle-FM record, or record_<frep>.csv from the records directory.
sigavg::HeterodyneRecord drive_record(const config::RunConfig& c, double frep_mhz);
fs::path record_path(const config::RunConfig& c, double frep_mhz);

propagation::Waveform input_pulse(const config::RunConfig& c);

struct EchoResult {
    propagation::EchoTrace trace;
    std::vector<propagation::EchoMeasurement> orders; // order 1..N
    std::vector<double> transmission;                 // normalized to the unburned crystal
};

EchoResult echo_from_populations(const config::RunConfig& c,
                                 const Medium& medium,
                                 const burn::PopulationGrid& populations,
                                 double frep_mhz);

struct PointResult {
    double frep_mhz = 0.0;
    std::string status = "ok"; // ok | flagged | failed
    std::string error;
    std::vector<propagation::EchoMeasurement> orders;
    std::size_t flagged_burn_points = 0;
    int stages_run = 0; // stages recomputed (0: all cache hits)
    double seconds = 0.0;
};

struct SweepResult {
    std::vector<PointResult> points;
    std::size_t failed = 0;
    int stages_run = 0;
    fs::path manifest;
};

/// Runs every repetition rate through drive -> burn -> dielectric ->
/// propagation, reusing cached stages whose inputs hash the same. A failing
/// point becomes a "failed" row; the sweep carries on.
SweepResult run_sweep(const config::RunConfig& c, std::ostream* log = nullptr);

/// Echo map from a sweep's echo_map.csv: rows f_rep, columns time.
Eigen::MatrixXd read_echo_map(const fs::path& csv);

std::string frep_tag(double frep_mhz);

} // namespace afc::orchestrator
