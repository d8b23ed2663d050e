#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "afc/burn.hpp"
#include "afc/dielectric.hpp"
#include "afc/hyperfine.hpp"
#include "afc/propagation.hpp"
#include "afc/sigavg.hpp"
#include "afc/synthetic.hpp"

#include "json.hpp"

namespace afc::config {

inline constexpr int kSchemaVersion = 1;

struct HyperfineConfig {
    std::array<double, 2> ground_spacings_mhz{10.19, 17.30};
    std::array<double, 2> excited_spacings_mhz{4.58, 4.84};
    std::string strengths_file = "data/oscillator_strengths.csv";
    hyperfine::AmplitudeModel model = hyperfine::AmplitudeModel::PrincipalAxis;
    std::optional<std::array<double, 3>> euler_deg; // skips the fit when set
    int fit_starts = 64;
    unsigned long long fit_seed = 20240607ULL;
};

struct LindbladConfig {
    double excited_lifetime_us = 164.0;
    double dephasing_rate = 0.0;
    double dt_target_us = 1e-3;
};

struct DielectricConfig {
    std::size_t points = std::size_t{1} << 20;
    double step_mhz = 0.05;
    double gamma_mhz = 0.1;
    double sigma_inh_mhz = 1869.0;
    double target_db = 9.9;
    dielectric::Optics optics;
};

struct PropagationConfig {
    double pulse_fwhm_ns = 10.0;
    double pulse_center_us = 0.2;
    std::size_t time_points = 20000;
    double dt_us = 1e-3;
    double keep_us = 10.0;
    double carrier_offset_mhz = 0.0;
    int orders = 2;
    double map_stop_us = 1.5; // echo maps keep t <= this
};

struct DriveConfig {
    std::string source = "synthetic"; // or "records"
    std::string records_dir;          // record_<frep>.csv files when source = records
    synthetic::TriangleFm synthetic;
    sigavg::AveragingOptions averaging;
};

struct SweepConfig {
    double frep_start_mhz = 1.0;
    double frep_stop_mhz = 16.0;
    double frep_step_mhz = 0.1;
    std::vector<double> frep_list; // overrides the range when non-empty

    std::vector<double> values() const;
};

struct RunConfig {
    bool fast = true;
    std::string output_dir = "afc-out";
    int workers = 0;
    HyperfineConfig hyperfine;
    LindbladConfig lindblad;
    burn::BurnPlan burn;
    DielectricConfig dielectric;
    PropagationConfig propagation;
    DriveConfig drive;
    SweepConfig sweep;

    /// Desk-scale defaults (2601-point, 0.3 s burn) or the full 7001-point,
    /// 30 s protocol.
    static RunConfig defaults(bool fast);
    void validate() const;

    /// Relative paths resolve against this directory (the config file's).
    std::filesystem::path base_dir;
    std::filesystem::path resolve(const std::string& p) const;
};

/// Reads `j` over the defaults of its mode ("mode": "fast" | "full"); unknown
/// keys are rejected. `force_mode` (if set) wins over the file.
RunConfig from_json(const nlohmann::json& j, std::optional<bool> force_fast = std::nullopt);
RunConfig load(const std::filesystem::path& path, std::optional<bool> force_fast = std::nullopt);
nlohmann::json to_json(const RunConfig& c);

} // namespace afc::config
