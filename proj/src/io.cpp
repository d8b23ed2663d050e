#include "afc/io.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "json.hpp"

namespace afc::io {

using nlohmann::json;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        out.push_back(trim(cell));
    }
    return out;
}

double parse_double(const std::string& s, const fs::path& path)
{
    try {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used == s.size()) {
            return x;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("not a number in " + path.string() + ": '" + s + "'");
}

fs::path sidecar(const fs::path& csv)
{
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

} // namespace

void write_atomic(const fs::path& path, const std::string& content)
{
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw ConfigError("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t Table::column(const std::string& name) const
{
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) {
            return k;
        }
    }
    throw ConfigError("missing column '" + name + "'");
}

std::vector<double> Table::numbers(const std::string& name) const
{
    const std::size_t c = column(name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) {
        require(c < r.size(), "short row in column '" + name + "'");
        v.push_back(parse_double(r[c], name));
    }
    return v;
}

Table read_csv(const fs::path& path)
{
    std::stringstream in(read_text(path));
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') {
            continue;
        }
        if (t.header.empty()) {
            t.header = split(s);
        } else {
            t.rows.push_back(split(s));
        }
    }
    require(!t.header.empty(), "empty CSV file " + path.string());
    return t;
}

std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

Eigen::Matrix3d read_strength_table(const fs::path& path)
{
    const Table t = read_csv(path);
    const char* rows[] = {"g12", "g32", "g52"};
    const char* cols[] = {"e12", "e32", "e52"};
    const std::size_t key = t.column("g_level");
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(std::nan(""));
    for (const auto& r : t.rows) {
        for (int i = 0; i < 3; ++i) {
            if (r.at(key) != rows[i]) {
                continue;
            }
            for (int j = 0; j < 3; ++j) {
                m(i, j) = parse_double(r.at(t.column(cols[j])), path);
            }
        }
    }
    require(m.allFinite(), "strength table needs rows g12, g32, g52");
    return m;
}

std::string format_populations(const burn::PopulationGrid& grid)
{
    std::string s = "detuning_mhz,pop_g12,pop_g32,pop_g52\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        s += num(grid.detuning_mhz[k]);
        for (double f : grid.fractions[k]) {
            s += "," + num(f);
        }
        s += "\n";
    }
    return s;
}

burn::PopulationGrid read_populations(const fs::path& path)
{
    const Table t = read_csv(path);
    burn::PopulationGrid g;
    g.detuning_mhz = t.numbers("detuning_mhz");
    const auto a = t.numbers("pop_g12");
    const auto b = t.numbers("pop_g32");
    const auto c = t.numbers("pop_g52");
    g.fractions.resize(a.size());
    g.qa.assign(a.size(), burn::PointQa{});
    for (std::size_t k = 0; k < a.size(); ++k) {
        g.fractions[k] = {a[k], b[k], c[k]};
    }
    return g;
}

std::string format_epsilon(const dielectric::DielectricSpectrum& eps, double half_window_mhz)
{
    const auto& grid = eps.grid;
    const auto w = static_cast<std::size_t>(std::llround(half_window_mhz / grid.step_mhz));
    require(w >= 1 && w <= grid.points / 2, "epsilon window outside the grid");
    std::string s = "detuning_mhz,re_eps_minus_1,im_eps_minus_1\n";
    for (std::size_t n = grid.points / 2 - w; n < grid.points / 2 + w; ++n) {
        s += num(grid.detuning(n)) + "," + num(eps.eps_minus_1[n].real()) + "," + num(eps.eps_minus_1[n].imag()) + "\n";
    }
    return s;
}

dielectric::DielectricSpectrum read_epsilon(const fs::path& path)
{
    const Table t = read_csv(path);
    const auto d = t.numbers("detuning_mhz");
    const auto re = t.numbers("re_eps_minus_1");
    const auto im = t.numbers("im_eps_minus_1");
    require(d.size() >= 4 && d.size() % 2 == 0, "epsilon file needs an even number of rows");
    dielectric::DielectricSpectrum eps;
    eps.grid.points = d.size();
    eps.grid.step_mhz = (d.back() - d.front()) / static_cast<double>(d.size() - 1);
    require(eps.grid.step_mhz > 0.0, "epsilon detunings must increase");
    require(std::abs(d.front() - eps.grid.detuning(0)) < 1e-6 * eps.grid.step_mhz,
            "epsilon window must be centered on zero detuning");
    eps.eps_minus_1.resize(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
        eps.eps_minus_1[k] = Complex(re[k], im[k]);
    }
    return eps;
}

std::string format_transmission(const dielectric::Grid& grid,
                                const std::vector<double>& transmission,
                                double half_window_mhz)
{
    const auto w = static_cast<std::size_t>(std::llround(half_window_mhz / grid.step_mhz));
    require(w >= 1 && w <= grid.points / 2, "transmission window outside the grid");
    std::string s = "detuning_mhz,transmission,transmission_db\n";
    for (std::size_t n = grid.points / 2 - w; n <= grid.points / 2 + w && n < grid.points; ++n) {
        s += num(grid.detuning(n)) + "," + num(transmission[n]) + "," + num(10.0 * std::log10(transmission[n])) + "\n";
    }
    return s;
}

std::string format_echo(const propagation::Waveform& w)
{
    std::string s = "time_us,re_u,im_u,abs2_u\n";
    for (std::size_t n = 0; n < w.size(); ++n) {
        s += num(w.time(n)) + "," + num(w.u[n].real()) + "," + num(w.u[n].imag()) + "," + num(std::norm(w.u[n])) + "\n";
    }
    return s;
}

void write_record(const fs::path& csv, const sigavg::HeterodyneRecord& record)
{
    std::string s = "sample\n";
    for (double x : record.samples) {
        s += num(x) + "\n";
    }
    write_atomic(csv, s);
    const json meta = {{"step_us", record.step_us},
                       {"duration_us", record.duration_us()},
                       {"frep_mhz", record.frep_mhz}};
    write_atomic(sidecar(csv), meta.dump(2) + "\n");
}

sigavg::HeterodyneRecord read_record(const fs::path& csv, double frep_mhz, double step_us)
{
    sigavg::HeterodyneRecord r;
    if (fs::exists(sidecar(csv))) {
        const json meta = json::parse(read_text(sidecar(csv)), nullptr, false);
        require(!meta.is_discarded(), "malformed record sidecar " + sidecar(csv).string());
        r.step_us = meta.value("step_us", r.step_us);
        r.frep_mhz = meta.value("frep_mhz", 0.0);
    }
    if (frep_mhz > 0.0) {
        r.frep_mhz = frep_mhz;
    }
    if (step_us > 0.0) {
        r.step_us = step_us;
    }
    const Table t = read_csv(csv);
    r.samples = t.numbers("sample");
    r.validate();
    return r;
}

std::string format_drive(const sigavg::AveragedPeriodicSignal& signal)
{
    json re = json::array();
    json im = json::array();
    for (const auto& z : signal.samples) {
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    const auto& q = signal.qa;
    const json j = {{"period_us", signal.period_us},
                    {"step_us", signal.step_us},
                    {"re", re},
                    {"im", im},
                    {"qa",
                     {{"empty_bin_fraction", q.empty_fraction},
                      {"endpoint_phase_error_rad", q.endpoint_phase_error},
                      {"frequency_shift_mhz", q.frequency_shift_mhz},
                      {"carrier_mhz", q.carrier_mhz},
                      {"crossings", q.crossings},
                      {"periods", q.periods}}}};
    return j.dump(1) + "\n";
}

sigavg::AveragedPeriodicSignal read_drive(const fs::path& path)
{
    const json j = json::parse(read_text(path), nullptr, false);
    require(!j.is_discarded(), "malformed drive file " + path.string());
    sigavg::AveragedPeriodicSignal s;
    try {
        s.period_us = j.at("period_us").get<double>();
        s.step_us = j.at("step_us").get<double>();
        const auto re = j.at("re").get<std::vector<double>>();
        const auto im = j.at("im").get<std::vector<double>>();
        require(re.size() == im.size() && !re.empty(), "drive re/im arrays differ in length");
        s.samples.resize(re.size());
        for (std::size_t k = 0; k < re.size(); ++k) {
            s.samples[k] = Complex(re[k], im[k]);
        }
        if (j.contains("qa")) {
            const auto& q = j["qa"];
            s.qa.empty_fraction = q.value("empty_bin_fraction", 0.0);
            s.qa.endpoint_phase_error = q.value("endpoint_phase_error_rad", 0.0);
            s.qa.frequency_shift_mhz = q.value("frequency_shift_mhz", 0.0);
            s.qa.carrier_mhz = q.value("carrier_mhz", 0.0);
            s.qa.crossings = q.value("crossings", std::size_t{0});
            s.qa.periods = q.value("periods", std::size_t{0});
        }
    } catch (const json::exception& e) {
        throw ConfigError("drive file " + path.string() + ": " + e.what());
    }
    require(s.period_us > 0.0, "drive period must be positive");
    return s;
}

} // namespace afc::io
