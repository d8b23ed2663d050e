#include "afc/config.hpp"

#include <cmath>
#include <set>

#include "afc/io.hpp"

namespace afc::config {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, remembering which were used so that
// typos surface as errors instead of silently falling back to defaults.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name))
    {
        require(j_.is_object(), "config section '" + name_ + "' must be an object");
    }

    ~Section() noexcept(false)
    {
        if (std::uncaught_exceptions() > 0) {
            return;
        }
        for (const auto& [key, value] : j_.items()) {
            require(used_.count(key) > 0, "unknown config key '" + name_ + "." + key + "'");
        }
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    const json* sub(const char* key)
    {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

void read_optics(const json& j, dielectric::Optics& o)
{
    Section s(j, "dielectric.optics");
    s.get("wavelength_nm", o.wavelength_nm);
    s.get("length_mm", o.length_mm);
    s.get("background_index", o.background_index);
    std::string k = o.convention == dielectric::WavevectorConvention::Vacuum ? "vacuum" : "medium";
    s.get("wavevector", k);
    require(k == "vacuum" || k == "medium", "dielectric.optics.wavevector must be 'vacuum' or 'medium'");
    o.convention = k == "vacuum" ? dielectric::WavevectorConvention::Vacuum : dielectric::WavevectorConvention::Medium;
}

} // namespace

std::vector<double> SweepConfig::values() const
{
    if (!frep_list.empty()) {
        return frep_list;
    }
    const double intervals = (frep_stop_mhz - frep_start_mhz) / frep_step_mhz;
    const auto n = static_cast<long>(std::llround(intervals));
    std::vector<double> v;
    for (long k = 0; k <= n; ++k) {
        // round to the step's decimal grid so 4.9 is 4.9, not 4.8999999
        v.push_back(std::round((frep_start_mhz + static_cast<double>(k) * frep_step_mhz) * 1e9) / 1e9);
    }
    return v;
}

RunConfig RunConfig::defaults(bool fast)
{
    RunConfig c;
    c.fast = fast;
    c.burn = fast ? burn::BurnPlan::fast() : burn::BurnPlan{};
    c.drive.synthetic.frep_mhz = 4.8;
    return c;
}

void RunConfig::validate() const
{
    require(workers >= 0, "workers must be non-negative");
    require(!output_dir.empty(), "output_dir must not be empty");
    burn.validate();
    require(lindblad.excited_lifetime_us > 0.0, "lindblad.excited_lifetime_us must be positive");
    require(lindblad.dephasing_rate >= 0.0, "lindblad.dephasing_rate must be non-negative");
    require(dielectric.points >= 4 && (dielectric.points & (dielectric.points - 1)) == 0,
            "dielectric.points must be a power of two");
    require(dielectric.step_mhz > 0.0 && dielectric.gamma_mhz > 0.0 && dielectric.sigma_inh_mhz > 0.0,
            "dielectric step, gamma and sigma must be positive");
    require(std::abs(dielectric.step_mhz - burn.step_mhz) < 1e-12, "burn and dielectric grid steps must match");
    require(dielectric.target_db > 0.0, "dielectric.target_db must be positive");
    require(propagation.time_points >= 2 && propagation.dt_us > 0.0, "propagation grid must be non-trivial");
    require(std::abs(1.0 / (static_cast<double>(propagation.time_points) * propagation.dt_us) - dielectric.step_mhz)
                < 1e-9 * dielectric.step_mhz,
            "propagation time span must equal 1 / dielectric step");
    require(propagation.orders >= 1, "propagation.orders must be at least 1");
    require(drive.source == "synthetic" || drive.source == "records", "drive.source must be 'synthetic' or 'records'");
    require(drive.source != "records" || !drive.records_dir.empty(), "drive.records_dir is required for records");
    if (drive.source == "records") {
        require(std::filesystem::is_directory(resolve(drive.records_dir)), "drive.records_dir does not exist");
    }
    require(std::filesystem::exists(resolve(hyperfine.strengths_file)) || hyperfine.euler_deg.has_value(),
            "hyperfine.strengths_file does not exist: " + resolve(hyperfine.strengths_file).string());
    if (sweep.frep_list.empty()) {
        require(sweep.frep_step_mhz > 0.0 && sweep.frep_stop_mhz >= sweep.frep_start_mhz && sweep.frep_start_mhz > 0.0,
                "sweep range must be positive and increasing");
        const double intervals = (sweep.frep_stop_mhz - sweep.frep_start_mhz) / sweep.frep_step_mhz;
        require(std::abs(intervals - std::round(intervals)) < 1e-6, "sweep step must divide the range");
    }
    for (double f : sweep.values()) {
        require(f > 0.0, "sweep repetition rates must be positive");
    }
}

std::filesystem::path RunConfig::resolve(const std::string& p) const
{
    const std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) {
        return path;
    }
    return base_dir / path;
}

RunConfig from_json(const json& j, std::optional<bool> force_fast)
{
    require(j.is_object(), "config must be a JSON object");
    require(j.contains("schema_version"), "config is missing schema_version");
    require(j.at("schema_version").is_number_integer() && j.at("schema_version").get<int>() == kSchemaVersion,
            "unsupported config schema_version (expected " + std::to_string(kSchemaVersion) + ")");

    std::string mode = "fast";
    if (j.contains("mode")) {
        require(j.at("mode").is_string(), "mode must be a string");
        mode = j.at("mode").get<std::string>();
    }
    require(mode == "fast" || mode == "full", "mode must be 'fast' or 'full'");
    const bool fast = force_fast.value_or(mode == "fast");
    RunConfig c = RunConfig::defaults(fast);

    Section top(j, "");
    int version = 0;
    top.get("schema_version", version);
    top.get("mode", mode);
    top.get("output_dir", c.output_dir);
    top.get("workers", c.workers);

    if (const json* s = top.sub("hyperfine")) {
        Section h(*s, "hyperfine");
        h.get("ground_spacings_mhz", c.hyperfine.ground_spacings_mhz);
        h.get("excited_spacings_mhz", c.hyperfine.excited_spacings_mhz);
        h.get("strengths_file", c.hyperfine.strengths_file);
        std::string model = hyperfine::to_string(c.hyperfine.model);
        h.get("amplitude_model", model);
        c.hyperfine.model = hyperfine::parse_amplitude_model(model);
        std::array<double, 3> euler{};
        if (const json* e = h.sub("euler_deg"); e != nullptr && !e->is_null()) {
            try {
                euler = e->get<std::array<double, 3>>();
            } catch (const json::exception&) {
                throw ConfigError("hyperfine.euler_deg must be three numbers");
            }
            c.hyperfine.euler_deg = euler;
        }
        h.get("fit_starts", c.hyperfine.fit_starts);
        h.get("fit_seed", c.hyperfine.fit_seed);
    }
    if (const json* s = top.sub("lindblad")) {
        Section l(*s, "lindblad");
        l.get("excited_lifetime_us", c.lindblad.excited_lifetime_us);
        l.get("dephasing_rate", c.lindblad.dephasing_rate);
        l.get("dt_target_us", c.lindblad.dt_target_us);
    }
    if (const json* s = top.sub("burn")) {
        Section b(*s, "burn");
        b.get("band_center_mhz", c.burn.band_center_mhz);
        b.get("span_mhz", c.burn.span_mhz);
        b.get("step_mhz", c.burn.step_mhz);
        b.get("burn_duration_s", c.burn.burn_duration_s);
        b.get("post_burn_delay_s", c.burn.post_burn_delay_s);
        b.get("rabi_strength", c.burn.rabi_strength);
    }
    if (const json* s = top.sub("dielectric")) {
        Section d(*s, "dielectric");
        d.get("points", c.dielectric.points);
        d.get("step_mhz", c.dielectric.step_mhz);
        d.get("gamma_mhz", c.dielectric.gamma_mhz);
        d.get("sigma_inh_mhz", c.dielectric.sigma_inh_mhz);
        d.get("target_db", c.dielectric.target_db);
        if (const json* o = d.sub("optics")) {
            read_optics(*o, c.dielectric.optics);
        }
    }
    if (const json* s = top.sub("propagation")) {
        Section p(*s, "propagation");
        p.get("pulse_fwhm_ns", c.propagation.pulse_fwhm_ns);
        p.get("pulse_center_us", c.propagation.pulse_center_us);
        p.get("time_points", c.propagation.time_points);
        p.get("dt_us", c.propagation.dt_us);
        p.get("keep_us", c.propagation.keep_us);
        p.get("carrier_offset_mhz", c.propagation.carrier_offset_mhz);
        p.get("orders", c.propagation.orders);
        p.get("map_stop_us", c.propagation.map_stop_us);
    }
    if (const json* s = top.sub("drive")) {
        Section d(*s, "drive");
        d.get("source", c.drive.source);
        d.get("records_dir", c.drive.records_dir);
        auto& t = c.drive.synthetic;
        d.get("carrier_mhz", t.carrier_mhz);
        d.get("deviation_mhz", t.deviation_mhz);
        d.get("step_us", t.step_us);
        d.get("duration_us", t.duration_us);
        d.get("snr_db", t.snr_db);
        d.get("seed", t.seed);
        d.get("edge_margin", c.drive.averaging.edge_margin);
        d.get("downsample", c.drive.averaging.downsample);
    }
    if (const json* s = top.sub("sweep")) {
        Section w(*s, "sweep");
        w.get("frep_start_mhz", c.sweep.frep_start_mhz);
        w.get("frep_stop_mhz", c.sweep.frep_stop_mhz);
        w.get("frep_step_mhz", c.sweep.frep_step_mhz);
        w.get("frep_list", c.sweep.frep_list);
    }
    c.burn.workers = c.workers;
    c.burn.dt_target_us = c.lindblad.dt_target_us;
    return c;
}

RunConfig load(const std::filesystem::path& path, std::optional<bool> force_fast)
{
    const json j = json::parse(io::read_text(path), nullptr, false);
    require(!j.is_discarded(), "config is not valid JSON: " + path.string());
    RunConfig c = from_json(j, force_fast);
    c.base_dir = path.parent_path();
    return c;
}

json to_json(const RunConfig& c)
{
    json j;
    j["schema_version"] = kSchemaVersion;
    j["mode"] = c.fast ? "fast" : "full";
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    const auto& h = c.hyperfine;
    j["hyperfine"] = {{"ground_spacings_mhz", h.ground_spacings_mhz},
                      {"excited_spacings_mhz", h.excited_spacings_mhz},
                      {"strengths_file", h.strengths_file},
                      {"amplitude_model", hyperfine::to_string(h.model)},
                      {"euler_deg", h.euler_deg ? json(*h.euler_deg) : json(nullptr)},
                      {"fit_starts", h.fit_starts},
                      {"fit_seed", h.fit_seed}};
    j["lindblad"] = {{"excited_lifetime_us", c.lindblad.excited_lifetime_us},
                     {"dephasing_rate", c.lindblad.dephasing_rate},
                     {"dt_target_us", c.lindblad.dt_target_us}};
    j["burn"] = {{"band_center_mhz", c.burn.band_center_mhz},
                 {"span_mhz", c.burn.span_mhz},
                 {"step_mhz", c.burn.step_mhz},
                 {"burn_duration_s", c.burn.burn_duration_s},
                 {"post_burn_delay_s", c.burn.post_burn_delay_s},
                 {"rabi_strength", c.burn.rabi_strength}};
    const auto& o = c.dielectric.optics;
    j["dielectric"] = {{"points", c.dielectric.points},
                       {"step_mhz", c.dielectric.step_mhz},
                       {"gamma_mhz", c.dielectric.gamma_mhz},
                       {"sigma_inh_mhz", c.dielectric.sigma_inh_mhz},
                       {"target_db", c.dielectric.target_db},
                       {"optics",
                        {{"wavelength_nm", o.wavelength_nm},
                         {"length_mm", o.length_mm},
                         {"background_index", o.background_index},
                         {"wavevector",
                          o.convention == dielectric::WavevectorConvention::Vacuum ? "vacuum" : "medium"}}}};
    const auto& p = c.propagation;
    j["propagation"] = {{"pulse_fwhm_ns", p.pulse_fwhm_ns},
                        {"pulse_center_us", p.pulse_center_us},
                        {"time_points", p.time_points},
                        {"dt_us", p.dt_us},
                        {"keep_us", p.keep_us},
                        {"carrier_offset_mhz", p.carrier_offset_mhz},
                        {"orders", p.orders},
                        {"map_stop_us", p.map_stop_us}};
    const auto& t = c.drive.synthetic;
    j["drive"] = {{"source", c.drive.source},
                  {"records_dir", c.drive.records_dir},
                  {"carrier_mhz", t.carrier_mhz},
                  {"deviation_mhz", t.deviation_mhz},
                  {"step_us", t.step_us},
                  {"duration_us", t.duration_us},
                  {"snr_db", t.snr_db},
                  {"seed", t.seed},
                  {"edge_margin", c.drive.averaging.edge_margin},
                  {"downsample", c.drive.averaging.downsample}};
    j["sweep"] = {{"frep_start_mhz", c.sweep.frep_start_mhz},
                  {"frep_stop_mhz", c.sweep.frep_stop_mhz},
                  {"frep_step_mhz", c.sweep.frep_step_mhz},
                  {"frep_list", c.sweep.frep_list}};
    return j;
}

} // namespace afc::config
