#include "afc/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>

#include <openssl/evp.h>

#include "afc/io.hpp"

namespace afc::orchestrator {

using nlohmann::json;

// bump when a stage's numerical output changes for the same inputs
constexpr int kCodeVersion = 1;

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    require_numerics(ctx != nullptr, "cannot allocate a hash context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1
        && EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 && EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    require_numerics(ok, "SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 15];
    }
    return out;
}

Cache::Cache(fs::path dir) : dir_(std::move(dir)) {}

Cache Cache::for_output(const fs::path& output_dir)
{
    if (const char* env = std::getenv("AFC_SIM_CACHE_DIR"); env != nullptr && *env != '\0') {
        return Cache(env);
    }
    return Cache(output_dir / "cache");
}

std::optional<std::string> Cache::get(const std::string& name) const
{
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    return io::read_text(p);
}

void Cache::put(const std::string& name, const std::string& content) const
{
    io::write_atomic(dir_ / name, content);
}

lindblad::IonModel ion_from_amplitudes(const config::RunConfig& c, const Eigen::Matrix3d& amplitudes)
{
    lindblad::IonModel ion;
    ion.ground_mhz = hyperfine::energies_from_spacings(c.hyperfine.ground_spacings_mhz);
    ion.excited_mhz = hyperfine::energies_from_spacings(c.hyperfine.excited_spacings_mhz);
    ion.amplitudes = amplitudes;
    ion.relax.excited_lifetime_us = c.lindblad.excited_lifetime_us;
    ion.relax.dephasing_rate = c.lindblad.dephasing_rate;
    // spontaneous decay branches like the optical strengths
    ion.relax.branching = amplitudes.cwiseAbs2();
    for (int j = 0; j < 3; ++j) {
        ion.relax.branching.col(j) /= ion.relax.branching.col(j).sum();
    }
    return ion;
}

hyperfine::FitResult fit_hamiltonian(const config::RunConfig& c)
{
    const auto ops = hyperfine::build_spin_operators();
    const auto g = hyperfine::make_manifold(c.hyperfine.ground_spacings_mhz, ops);
    const auto e = hyperfine::make_manifold(c.hyperfine.excited_spacings_mhz, ops);
    const Eigen::Matrix3d target = io::read_strength_table(c.resolve(c.hyperfine.strengths_file));
    hyperfine::FitOptions options;
    options.starts = c.hyperfine.fit_starts;
    options.seed = c.hyperfine.fit_seed;
    options.model = c.hyperfine.model;
    return hyperfine::fit_euler_angles(target, g, e, ops, options);
}

HamiltonianModel build_model(const config::RunConfig& c)
{
    HamiltonianModel m;
    if (c.hyperfine.euler_deg) {
        const auto ops = hyperfine::build_spin_operators();
        const auto g = hyperfine::make_manifold(c.hyperfine.ground_spacings_mhz, ops);
        const auto e = hyperfine::make_manifold(c.hyperfine.excited_spacings_mhz, ops);
        m.angles.alpha = (*c.hyperfine.euler_deg)[0];
        m.angles.beta = (*c.hyperfine.euler_deg)[1];
        m.angles.gamma = (*c.hyperfine.euler_deg)[2];
        m.ion = ion_from_amplitudes(c, hyperfine::transition_amplitudes(g, e, m.angles, c.hyperfine.model, ops));
        return m;
    }
    m.fit = fit_hamiltonian(c);
    require_numerics(m.fit->converged, "Euler-angle fit did not converge: " + m.fit->diagnostic);
    m.angles = m.fit->angles;
    m.ion = ion_from_amplitudes(c, m.fit->amplitudes);
    return m;
}

Medium Medium::build(const config::RunConfig& c, const lindblad::IonModel& ion)
{
    Medium m;
    m.model.lines = dielectric::IonLines::from_ion(ion);
    m.model.gamma_mhz = c.dielectric.gamma_mhz;
    m.model.sigma_inh_mhz = c.dielectric.sigma_inh_mhz;
    m.optics = c.dielectric.optics;
    dielectric::Grid grid;
    grid.points = c.dielectric.points;
    grid.step_mhz = c.dielectric.step_mhz;
    m.kernel = dielectric::polarizability_kernel(m.model, grid);
    m.calibration = dielectric::calibrate(dielectric::unburned_center_sum(m.kernel, m.model), c.dielectric.target_db, m.optics);
    m.baseline = dielectric::build_spectrum(burn::PopulationGrid{}, m.kernel, m.model, m.calibration);
    return m;
}

std::string frep_tag(double frep_mhz)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", frep_mhz);
    return buf;
}

fs::path record_path(const config::RunConfig& c, double frep_mhz)
{
    return c.resolve(c.drive.records_dir) / ("record_" + frep_tag(frep_mhz) + ".csv");
}

sigavg::HeterodyneRecord drive_record(const config::RunConfig& c, double frep_mhz)
{
    if (c.drive.source == "records") {
        return io::read_record(record_path(c, frep_mhz), frep_mhz);
    }
    synthetic::TriangleFm p = c.drive.synthetic;
    p.frep_mhz = frep_mhz;
    return synthetic::generate_record(p);
}

propagation::Waveform input_pulse(const config::RunConfig& c)
{
    const auto& p = c.propagation;
    return propagation::gaussian_pulse(p.pulse_fwhm_ns, p.pulse_center_us, p.time_points, p.dt_us);
}

EchoResult echo_from_populations(const config::RunConfig& c,
                                 const Medium& medium,
                                 const burn::PopulationGrid& populations,
                                 double frep_mhz)
{
    const auto eps = dielectric::build_spectrum(populations, medium.kernel, medium.model, medium.calibration);
    const auto pulse = input_pulse(c);
    propagation::PropagationOptions options;
    options.carrier_offset_mhz = c.propagation.carrier_offset_mhz;
    options.keep_us = c.propagation.keep_us;

    EchoResult r;
    r.trace.output = propagation::propagate(pulse, eps, medium.optics, options);
    r.trace.pulse_center_us = c.propagation.pulse_center_us;
    r.trace.pulse_fwhm_ns = c.propagation.pulse_fwhm_ns;
    r.trace.input_energy = pulse.energy();
    r.trace.frep_mhz = frep_mhz;
    for (int n = 1; n <= c.propagation.orders; ++n) {
        r.orders.push_back(propagation::echo_energy(r.trace, n));
    }
    r.transmission = propagation::transmission_spectrum(eps, medium.baseline, medium.optics);
    return r;
}

namespace {

std::string hash_json(const json& j)
{
    return sha256_hex(j.dump());
}

json without_run_keys(const config::RunConfig& c)
{
    json j = config::to_json(c);
    j.erase("output_dir");
    j.erase("workers");
    j.erase("sweep");
    return j;
}

// Stage keys: each folds in the key of the stage it consumes.
struct StageKeys {
    std::string drive;
    std::string burn;
    std::string echo;
};

StageKeys stage_keys(const config::RunConfig& c, double frep, const std::string& record_hash,
                     const std::string& strengths_hash)
{
    const json all = without_run_keys(c);
    StageKeys k;
    k.drive = hash_json({{"v", kCodeVersion}, {"stage", "drive"}, {"frep", frep}, {"drive", all["drive"]},
                         {"record", record_hash}});
    k.burn = hash_json({{"v", kCodeVersion}, {"stage", "burn"}, {"drive", k.drive}, {"hyperfine", all["hyperfine"]},
                        {"strengths", strengths_hash}, {"lindblad", all["lindblad"]}, {"burn", all["burn"]},
                        {"mode", all["mode"]}});
    k.echo = hash_json({{"v", kCodeVersion}, {"stage", "echo"}, {"burn", k.burn}, {"dielectric", all["dielectric"]},
                        {"propagation", all["propagation"]}});
    return k;
}

json measurement_json(const propagation::EchoMeasurement& m)
{
    return {{"energy", m.energy}, {"peak_us", m.peak_us}, {"flagged", m.flagged}};
}

propagation::EchoMeasurement measurement_from(const json& j)
{
    propagation::EchoMeasurement m;
    m.energy = j.at("energy").get<double>();
    m.peak_us = j.at("peak_us").get<double>();
    m.flagged = j.at("flagged").get<bool>();
    return m;
}

std::string energy_csv(const std::vector<PointResult>& points, int orders)
{
    std::string s = "frep_mhz";
    for (int n = 1; n <= orders; ++n) {
        s += ",e" + std::to_string(n);
    }
    for (int n = 1; n <= orders; ++n) {
        s += ",peak" + std::to_string(n) + "_us";
    }
    s += ",status\n";
    for (const auto& p : points) {
        s += io::num(p.frep_mhz);
        for (int n = 0; n < orders; ++n) {
            s += "," + (p.orders.size() > static_cast<std::size_t>(n) ? io::num(p.orders[n].energy) : std::string("nan"));
        }
        for (int n = 0; n < orders; ++n) {
            s += "," + (p.orders.size() > static_cast<std::size_t>(n) ? io::num(p.orders[n].peak_us) : std::string("nan"));
        }
        s += "," + p.status + "\n";
    }
    return s;
}

} // namespace

SweepResult run_sweep(const config::RunConfig& c, std::ostream* log)
{
    c.validate();
    const fs::path out = c.output_dir;
    fs::create_directories(out);
    const Cache cache = Cache::for_output(out);
    const auto freps = c.sweep.values();

    const fs::path strengths = c.resolve(c.hyperfine.strengths_file);
    const std::string strengths_hash =
        c.hyperfine.euler_deg || !fs::exists(strengths) ? std::string("none") : sha256_hex(io::read_text(strengths));

    // built on first use: a fully cached sweep never fits or convolves
    std::optional<HamiltonianModel> model;
    std::optional<Medium> medium;
    auto need_model = [&]() -> const HamiltonianModel& {
        if (!model) {
            model = build_model(c);
        }
        return *model;
    };
    auto need_medium = [&]() -> const Medium& {
        if (!medium) {
            medium = Medium::build(c, need_model().ion);
        }
        return *medium;
    };

    SweepResult result;
    json manifest;
    manifest["schema_version"] = config::kSchemaVersion;
    manifest["config"] = config::to_json(c);
    manifest["config_hash"] = hash_json(without_run_keys(c));
    manifest["cache_dir"] = fs::absolute(cache.dir()).string();
    manifest["points"] = json::array();
    const fs::path manifest_path = out / "manifest.json";
    std::string echo_map = "frep_mhz,time_us,abs2_u\n";

    for (const double frep : freps) {
        const auto start = std::chrono::steady_clock::now();
        PointResult point;
        point.frep_mhz = frep;
        json entry = {{"frep_mhz", frep}};
        const std::string tag = frep_tag(frep);
        const fs::path trace_file = out / "traces" / ("echo_f" + tag + ".csv");
        const fs::path pop_file = out / "populations" / ("populations_f" + tag + ".csv");
        const fs::path trans_file = out / "spectra" / ("transmission_f" + tag + ".csv");
        try {
            std::string record_hash = "synthetic";
            if (c.drive.source == "records") {
                record_hash = sha256_hex(io::read_text(record_path(c, frep)));
            }
            const StageKeys keys = stage_keys(c, frep, record_hash, strengths_hash);
            entry["stages"] = {{"drive", {{"key", keys.drive}}}, {"burn", {{"key", keys.burn}}}, {"echo", {{"key", keys.echo}}}};

            const std::string echo_name = "echo_" + keys.echo + ".json";
            auto cached_echo = cache.get(echo_name);
            if (!cached_echo) {
                // drive stage
                sigavg::AveragedPeriodicSignal signal;
                const std::string drive_name = "drive_" + keys.drive + ".json";
                auto pops_cached = cache.get("populations_" + keys.burn + ".csv");
                std::string pops_text;
                entry["stages"]["drive"]["hit"] = true;
                if (pops_cached) {
                    pops_text = *pops_cached;
                    entry["stages"]["burn"]["hit"] = true;
                } else {
                    if (auto d = cache.get(drive_name)) {
                        io::write_atomic(out / "drives" / ("drive_f" + tag + ".json"), *d);
                        signal = io::read_drive(out / "drives" / ("drive_f" + tag + ".json"));
                    } else {
                        signal = sigavg::assemble_periodic_signal(drive_record(c, frep), c.drive.averaging);
                        cache.put(drive_name, io::format_drive(signal));
                        io::write_atomic(out / "drives" / ("drive_f" + tag + ".json"), io::format_drive(signal));
                        entry["stages"]["drive"]["hit"] = false;
                        ++point.stages_run;
                    }
                    const auto pops = burn::burn_afc(c.burn, signal.drive(c.burn.rabi_strength), need_model().ion);
                    point.flagged_burn_points = pops.flagged();
                    pops_text = io::format_populations(pops);
                    cache.put("populations_" + keys.burn + ".csv", pops_text);
                    cache.put("burnqa_" + keys.burn + ".json",
                              json({{"flagged_points", pops.flagged()}}).dump() + "\n");
                    entry["stages"]["burn"]["hit"] = false;
                    ++point.stages_run;
                }
                io::write_atomic(pop_file, pops_text);
                const auto pops = io::read_populations(pop_file);
                const auto r = echo_from_populations(c, need_medium(), pops, frep);
                json e = {{"orders", json::array()}};
                for (const auto& m : r.orders) {
                    e["orders"].push_back(measurement_json(m));
                }
                if (auto qa = cache.get("burnqa_" + keys.burn + ".json")) {
                    e["flagged_burn_points"] = json::parse(*qa).value("flagged_points", 0);
                }
                cache.put("trace_" + keys.echo + ".csv", io::format_echo(r.trace.output));
                cache.put("transmission_" + keys.echo + ".csv",
                          io::format_transmission(need_medium().kernel.grid, r.transmission, 70.0));
                cache.put("pops_" + keys.echo + ".csv", pops_text);
                cache.put(echo_name, e.dump() + "\n");
                cached_echo = e.dump();
                entry["stages"]["echo"]["hit"] = false;
                ++point.stages_run;
            } else {
                entry["stages"]["echo"]["hit"] = true;
            }

            const json e = json::parse(*cached_echo);
            for (const auto& m : e.at("orders")) {
                point.orders.push_back(measurement_from(m));
            }
            point.flagged_burn_points = e.value("flagged_burn_points", std::size_t{0});
            const auto trace_text = cache.get("trace_" + keys.echo + ".csv");
            const auto trans_text = cache.get("transmission_" + keys.echo + ".csv");
            const auto pops_text = cache.get("pops_" + keys.echo + ".csv");
            require(trace_text && trans_text && pops_text, "cache entry " + keys.echo + " is incomplete");
            io::write_atomic(trace_file, *trace_text);
            io::write_atomic(trans_file, *trans_text);
            io::write_atomic(pop_file, *pops_text);

            const auto table = io::read_csv(trace_file);
            const auto t = table.numbers("time_us");
            const auto p2 = table.numbers("abs2_u");
            for (std::size_t n = 0; n < t.size() && t[n] <= c.propagation.map_stop_us + 1e-12; ++n) {
                echo_map += io::num(frep) + "," + io::num(t[n]) + "," + io::num(p2[n]) + "\n";
            }

            bool flagged = point.flagged_burn_points > 0;
            if (!point.orders.empty() && point.orders.front().flagged) {
                flagged = true;
            }
            point.status = flagged ? "flagged" : "ok";
            entry["artifacts"] = {{"trace", fs::relative(trace_file, out).string()},
                                  {"populations", fs::relative(pop_file, out).string()},
                                  {"transmission", fs::relative(trans_file, out).string()}};
        } catch (const std::exception& ex) {
            point.status = "failed";
            point.error = ex.what();
            point.orders.clear();
            ++result.failed;
            entry["error"] = ex.what();
        }
        point.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.stages_run += point.stages_run;
        entry["status"] = point.status;
        entry["stages_run"] = point.stages_run;
        entry["seconds"] = point.seconds;
        entry["flagged_burn_points"] = point.flagged_burn_points;
        if (!point.orders.empty()) {
            entry["echo"] = json::array();
            for (const auto& m : point.orders) {
                entry["echo"].push_back(measurement_json(m));
            }
        }
        manifest["points"].push_back(entry);
        result.points.push_back(point);
        io::write_atomic(manifest_path, manifest.dump(2) + "\n");
        if (log != nullptr) {
            *log << "f_rep " << tag << " MHz: " << point.status;
            if (!point.orders.empty()) {
                *log << "  e1 " << point.orders.front().energy;
            }
            if (!point.error.empty()) {
                *log << "  (" << point.error << ")";
            }
            *log << "  stages run " << point.stages_run << "  " << point.seconds << " s\n";
        }
    }

    io::write_atomic(out / "echo_energy.csv", energy_csv(result.points, c.propagation.orders));
    io::write_atomic(out / "echo_map.csv", echo_map);
    manifest["summary"] = {{"points", result.points.size()},
                           {"failed", result.failed},
                           {"stages_run", result.stages_run}};
    if (model && model->fit) {
        manifest["hamiltonian"] = {{"alpha_deg", model->angles.alpha},
                                   {"beta_deg", model->angles.beta},
                                   {"gamma_deg", model->angles.gamma},
                                   {"rms", model->fit->rms}};
    }
    io::write_atomic(manifest_path, manifest.dump(2) + "\n");
    result.manifest = manifest_path;
    return result;
}

Eigen::MatrixXd read_echo_map(const fs::path& csv)
{
    const auto t = io::read_csv(csv);
    const auto f = t.numbers("frep_mhz");
    const auto time = t.numbers("time_us");
    const auto v = t.numbers("abs2_u");
    std::map<double, std::vector<double>> rows;
    for (std::size_t k = 0; k < f.size(); ++k) {
        rows[f[k]].push_back(v[k]);
    }
    require(!rows.empty(), "echo map is empty");
    const std::size_t cols = rows.begin()->second.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    Eigen::Index r = 0;
    for (const auto& [freq, values] : rows) {
        require(values.size() == cols, "echo map rows differ in length");
        for (std::size_t k = 0; k < cols; ++k) {
            m(r, static_cast<Eigen::Index>(k)) = values[k];
        }
        ++r;
    }
    return m;
}

} // namespace afc::orchestrator
