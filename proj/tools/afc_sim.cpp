// afc-sim: command-line front end for the AFC simulation pipeline.
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "afc/io.hpp"
#include "afc/orchestrator.hpp"

using namespace afc;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kPartial = 4 };

struct Common {
    std::string config;
    bool full = false;
    bool fast = false;
    int workers = -1;

    config::RunConfig load() const
    {
        std::optional<bool> mode;
        if (full) {
            mode = false;
        } else if (fast) {
            mode = true;
        }
        config::RunConfig c = config.empty() ? config::RunConfig::defaults(mode.value_or(true))
                                             : config::load(config, mode);
        if (workers >= 0) {
            c.workers = workers;
            c.burn.workers = workers;
        }
        return c;
    }
};

void add_common(CLI::App* app, Common& common)
{
    app->add_option("-c,--config", common.config, "JSON run configuration");
    auto* full = app->add_flag("--full", common.full, "full-fidelity settings (7001 points, 30 s burn)");
    app->add_flag("--fast", common.fast, "desk-scale settings (default)")->excludes(full);
    app->add_option("-j,--workers", common.workers, "worker threads (0: all cores)");
}

void print_matrix(const char* title, const Eigen::Matrix3d& m)
{
    std::printf("%s\n", title);
    for (int i = 0; i < 3; ++i) {
        std::printf("  %9.4f %9.4f %9.4f\n", m(i, 0), m(i, 1), m(i, 2));
    }
}

int fit_hamiltonian(const Common& common, const std::string& out)
{
    const auto c = common.load();
    const auto fit = orchestrator::fit_hamiltonian(c);
    const auto& a = fit.angles;
    std::printf("Euler angles (deg): alpha %.3f +- %.3f  beta %.3f +- %.3f  gamma %.3f +- %.3f\n", a.alpha,
                a.sigma[0], a.beta, a.sigma[1], a.gamma, a.sigma[2]);
    std::printf("RMS residual of squared amplitudes: %.5f (%s, best start %d)\n", fit.rms,
                fit.converged ? "converged" : "not converged", fit.best_start);
    print_matrix("amplitudes (rows ground 1/2,3/2,5/2; columns excited):", fit.amplitudes);
    const auto table = hyperfine::transition_table(c.hyperfine.ground_spacings_mhz, c.hyperfine.excited_spacings_mhz);
    std::printf("transition table (MHz; * = shares the ground level):\n");
    for (int x = 0; x < 9; ++x) {
        std::printf("  %c", 'A' + x);
        for (int y = 0; y < 9; ++y) {
            std::printf(" %7.2f%c", table.detuning(x, y), table.shares_ground(x, y) ? '*' : ' ');
        }
        std::printf("\n");
    }
    if (!out.empty()) {
        json amps = json::array();
        for (int i = 0; i < 3; ++i) {
            amps.push_back({fit.amplitudes(i, 0), fit.amplitudes(i, 1), fit.amplitudes(i, 2)});
        }
        const json j = {{"alpha_deg", a.alpha},
                        {"beta_deg", a.beta},
                        {"gamma_deg", a.gamma},
                        {"sigma_deg", {a.sigma[0], a.sigma[1], a.sigma[2]}},
                        {"rms", fit.rms},
                        {"converged", fit.converged},
                        {"amplitude_model", hyperfine::to_string(c.hyperfine.model)},
                        {"amplitudes", amps}};
        io::write_atomic(out, j.dump(2) + "\n");
    }
    return fit.converged ? kOk : kNumerical;
}

int average_signal(const std::string& in, double frep, double step_ns, const std::string& out)
{
    const auto record = io::read_record(in, frep, step_ns > 0.0 ? step_ns * 1e-3 : 0.0);
    const auto s = sigavg::assemble_periodic_signal(record);
    io::write_atomic(out, io::format_drive(s));
    std::printf("period %.6f us, %zu samples of %.6f ns; carrier %.3f MHz, shift %.4f MHz, empty bins %.3f, "
                "endpoint phase error %.2e rad\n",
                s.period_us, s.samples.size(), s.step_us * 1e3, s.qa.carrier_mhz, s.qa.frequency_shift_mhz,
                s.qa.empty_fraction, s.qa.endpoint_phase_error);
    return kOk;
}

int synth_record(const Common& common, double frep, double snr, const std::string& out)
{
    const auto c = common.load();
    synthetic::TriangleFm p = c.drive.synthetic;
    p.frep_mhz = frep;
    if (snr > 0.0) {
        p.snr_db = snr;
    }
    io::write_record(out, synthetic::generate_record(p));
    return kOk;
}

int run_burn(const Common& common, const std::string& drive, double cw_rabi, double cw_center, const std::string& out)
{
    const auto c = common.load();
    const auto model = orchestrator::build_model(c);
    lindblad::PeriodicDrive d;
    burn::BurnPlan plan = c.burn;
    if (!drive.empty()) {
        d = io::read_drive(drive).drive(plan.rabi_strength);
    } else {
        if (cw_rabi > 0.0) {
            plan.rabi_strength = cw_rabi;
        }
        d = lindblad::PeriodicDrive::continuous_wave(plan.rabi_strength, cw_center);
    }
    const auto pops = burn::burn_afc(plan, d, model.ion);
    io::write_atomic(out, io::format_populations(pops));
    std::printf("%zu detunings, %zu flagged\n", pops.size(), pops.flagged());
    return pops.flagged() == 0 ? kOk : kNumerical;
}

int run_dielectric(const Common& common, const std::string& populations, double window, const std::string& out,
                   const std::string& transmission)
{
    const auto c = common.load();
    const auto model = orchestrator::build_model(c);
    const auto medium = orchestrator::Medium::build(c, model.ion);
    const auto pops = populations.empty() ? burn::PopulationGrid{} : io::read_populations(populations);
    const auto eps = dielectric::build_spectrum(pops, medium.kernel, medium.model, medium.calibration);
    io::write_atomic(out, io::format_epsilon(eps, window));
    if (!transmission.empty()) {
        const auto t = propagation::transmission_spectrum(eps, medium.baseline, medium.optics);
        io::write_atomic(transmission, io::format_transmission(eps.grid, t, std::min(window, 200.0)));
    }
    std::printf("calibration scale %.6e, n2(0) %.5e, unburned attenuation %.4f dB\n", medium.calibration.scale,
                medium.calibration.n2_center, dielectric::attenuation_db(medium.baseline.at_center(), medium.optics));
    return kOk;
}

int run_propagate(const Common& common, const std::string& epsilon, double fwhm, double frep, const std::string& out)
{
    auto c = common.load();
    c.propagation.pulse_fwhm_ns = fwhm;
    const auto eps = io::read_epsilon(epsilon);
    const auto pulse = orchestrator::input_pulse(c);
    propagation::PropagationOptions options;
    options.carrier_offset_mhz = c.propagation.carrier_offset_mhz;
    options.keep_us = c.propagation.keep_us;
    propagation::EchoTrace trace;
    trace.output = propagation::propagate(pulse, eps, c.dielectric.optics, options);
    io::write_atomic(out, io::format_echo(trace.output));
    std::printf("transmitted energy fraction %.6f\n", trace.output.energy() / pulse.energy());
    if (frep > 0.0) {
        trace.pulse_center_us = c.propagation.pulse_center_us;
        trace.pulse_fwhm_ns = fwhm;
        trace.input_energy = pulse.energy();
        trace.frep_mhz = frep;
        for (int n = 1; n <= c.propagation.orders; ++n) {
            const auto m = propagation::echo_energy(trace, n);
            std::printf("echo %d: energy %.6e, peak %.4f us%s\n", n, m.energy, m.peak_us, m.flagged ? " (flagged)" : "");
        }
    }
    return kOk;
}

int run_sweep(const Common& common, double start, double stop, double step, const std::vector<double>& list,
              const std::string& out)
{
    auto c = common.load();
    if (start > 0.0 || stop > 0.0 || step > 0.0) {
        if (start > 0.0) {
            c.sweep.frep_start_mhz = start;
        }
        if (stop > 0.0) {
            c.sweep.frep_stop_mhz = stop;
        }
        if (step > 0.0) {
            c.sweep.frep_step_mhz = step;
        }
        c.sweep.frep_list.clear();
    }
    if (!list.empty()) {
        c.sweep.frep_list = list;
    }
    if (!out.empty()) {
        c.output_dir = out;
    }
    const auto r = orchestrator::run_sweep(c, &std::cerr);
    std::printf("%zu points, %zu failed, %d stages recomputed; manifest %s\n", r.points.size(), r.failed,
                r.stages_run, r.manifest.string().c_str());
    return r.failed > 0 ? kPartial : kOk;
}

int compare(const std::string& a, const std::string& b, int shuffles)
{
    const auto ma = orchestrator::read_echo_map(a);
    const auto mb = orchestrator::read_echo_map(b);
    const double r = propagation::pearson_r(ma, mb);
    const auto base = propagation::shuffle_baseline(ma, mb, shuffles, 12345);
    std::printf("r = %.6f, r^2 = %.6f; shuffled baseline r^2 mean %.3e, max %.3e (%d shuffles)\n", r, r * r,
                base.mean_r2, base.max_r2, shuffles);
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Atomic-frequency-comb photon-echo simulator"};
    app.require_subcommand(1);
    Common common;

    std::string out;
    auto* fit = app.add_subcommand("fit-hamiltonian", "fit relative Euler angles to the oscillator-strength table");
    add_common(fit, common);
    fit->add_option("-o,--out", out, "write the fit as JSON");

    std::string in;
    double frep = 0.0;
    double step_ns = 0.0;
    auto* avg = app.add_subcommand("average-signal", "periodic drive envelope from a heterodyne record");
    avg->add_option("--in", in, "record CSV (column 'sample')")->required();
    avg->add_option("--frep-mhz", frep, "modulation frequency (default: record sidecar)");
    avg->add_option("--step-ns", step_ns, "sample step (default: record sidecar, else 0.2 ns)");
    avg->add_option("-o,--out", out, "drive JSON")->required();

    double snr = 0.0;
    auto* synth = app.add_subcommand("synth-record", "write a synthetic triangle-FM heterodyne record");
    add_common(synth, common);
    synth->add_option("--frep-mhz", frep, "modulation frequency")->required();
    synth->add_option("--snr-db", snr, "additive noise (default: config)");
    synth->add_option("-o,--out", out, "record CSV (plus .json sidecar)")->required();

    std::string drive;
    double cw_rabi = 0.0;
    double cw_center = 0.0;
    auto* burn = app.add_subcommand("burn", "burn the population grid with a periodic drive");
    add_common(burn, common);
    auto* drive_opt = burn->add_option("--drive", drive, "drive JSON from average-signal");
    burn->add_option("--cw-rabi", cw_rabi, "single-frequency burn with this Rabi strength")->excludes(drive_opt);
    burn->add_option("--cw-center-mhz", cw_center, "single-frequency burn detuning");
    burn->add_option("-o,--out", out, "populations CSV")->required();

    std::string populations;
    std::string transmission;
    double window = 600.0;
    auto* diel = app.add_subcommand("dielectric", "dielectric function of a burned crystal");
    add_common(diel, common);
    diel->add_option("--populations", populations, "populations CSV (default: unburned)");
    diel->add_option("--window-mhz", window, "half width of the written window");
    diel->add_option("--transmission", transmission, "also write the normalized transmission CSV");
    diel->add_option("-o,--out", out, "epsilon CSV")->required();

    std::string epsilon;
    double fwhm = 10.0;
    auto* prop = app.add_subcommand("propagate", "propagate a Gaussian probe pulse");
    add_common(prop, common);
    prop->add_option("--epsilon", epsilon, "epsilon CSV")->required();
    prop->add_option("--pulse-fwhm-ns", fwhm, "pulse FWHM");
    prop->add_option("--frep-mhz", frep, "report echo energies for this repetition rate");
    prop->add_option("-o,--out", out, "echo CSV")->required();

    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
    std::vector<double> list;
    auto* sweep = app.add_subcommand("sweep", "full pipeline over a range of repetition rates");
    add_common(sweep, common);
    sweep->add_option("--frep-start", start, "first repetition rate (MHz)");
    sweep->add_option("--frep-stop", stop, "last repetition rate (MHz)");
    sweep->add_option("--frep-step", step, "repetition-rate step (MHz)");
    sweep->add_option("--frep", list, "explicit repetition rates (MHz)");
    sweep->add_option("-o,--out", out, "output directory");

    std::string map_a;
    std::string map_b;
    int shuffles = 100;
    auto* cmp = app.add_subcommand("compare", "Pearson r^2 between two echo maps");
    cmp->add_option("map_a", map_a, "echo_map.csv")->required();
    cmp->add_option("map_b", map_b, "echo_map.csv")->required();
    cmp->add_option("--shuffles", shuffles, "permutation baseline size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (*fit) {
            return fit_hamiltonian(common, out);
        }
        if (*avg) {
            return average_signal(in, frep, step_ns, out);
        }
        if (*synth) {
            return synth_record(common, frep, snr, out);
        }
        if (*burn) {
            return run_burn(common, drive, cw_rabi, cw_center, out);
        }
        if (*diel) {
            return run_dielectric(common, populations, window, out, transmission);
        }
        if (*prop) {
            return run_propagate(common, epsilon, fwhm, frep, out);
        }
        if (*sweep) {
            return run_sweep(common, start, stop, step, list, out);
        }
        if (*cmp) {
            return compare(map_a, map_b, shuffles);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
