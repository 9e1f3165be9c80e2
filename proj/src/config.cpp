#include "spatconf/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>

#include "spatconf/errors.hpp"
#include "spatconf/format.hpp"

#ifndef SPATCONF_VERSION
#define SPATCONF_VERSION "unknown"
#endif

namespace spatconf {

std::string library_version() { return SPATCONF_VERSION; }

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

std::vector<ConfigEntry> parse_config(std::istream& is) {
    std::vector<ConfigEntry> out;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::string text = trim(raw);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line);
        ConfigEntry e{trim(text.substr(0, eq)), trim(text.substr(eq + 1)), line};
        if (e.key.empty()) throw ParseError("empty key", line);
        if (!seen.insert(e.key).second) throw ParseError("duplicate key '" + e.key + "'", line);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ConfigEntry> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    return parse_config(in);
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (v.empty() || res.ec != std::errc() || res.ptr != end)
        throw DomainError("setting " + key + ": '" + v + "' is not a number");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const char* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (v.empty() || res.ec != std::errc() || res.ptr != end)
        throw DomainError("setting " + key + ": '" + v + "' is not an integer");
    return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (v.empty() || res.ec != std::errc() || res.ptr != end)
        throw DomainError("setting " + key + ": '" + v + "' is not a non-negative integer");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw DomainError("setting " + key + ": '" + v + "' is not a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(key, item));
    return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split_list(v)) out.push_back(static_cast<int>(parse_int(key, item)));
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F format) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format(v[i]);
    }
    return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Setting {
    const char* key;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define SPATCONF_DOUBLE(name, field)                                                                            \
    Setting{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
            [](const RunConfig& c) { return format_double(c.field); }}

const std::vector<Setting>& settings() {
    static const std::vector<Setting> table = {
        {"experiment", [](RunConfig& c, const std::string&, const std::string& v) { c.spec.id = experiment_from_string(v); },
         [](const RunConfig& c) { return to_string(c.spec.id); }},
        {"seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.spec.seed = parse_seed(k, v);
             c.seed_given = true;
         },
         [](const RunConfig& c) { return std::to_string(c.spec.seed); }},
        {"jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.jobs = static_cast<int>(parse_int(k, v)); },
         [](const RunConfig& c) { return std::to_string(c.spec.jobs); }},
        {"output", [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
         [](const RunConfig& c) { return c.output_dir; }},
        {"n_sims",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "auto") c.spec.n_sims.reset();
             else c.spec.n_sims = static_cast<int>(parse_int(k, v));
         },
         [](const RunConfig& c) { return std::to_string(c.spec.resolved_sims()); }},
        SPATCONF_DOUBLE("scale", spec.scale),
        {"full", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.full = parse_bool(k, v); },
         [](const RunConfig& c) { return bool_text(c.spec.full); }},
        {"n", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.n = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.spec.n); }},
        {"design",
         [](RunConfig& c, const std::string&, const std::string& v) {
             if (v == "auto") {
                 c.spec.design.reset();
                 return;
             }
             DesignSpec d = c.spec.design.value_or(DesignSpec{});
             d.kind = design_from_string(v);
             c.spec.design = d;
         },
         [](const RunConfig& c) { return to_string(c.spec.resolved_design().kind); }},
        {"cluster_children",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             DesignSpec d = c.spec.resolved_design();
             d.mean_children = parse_double(k, v);
             c.spec.design = d;
         },
         [](const RunConfig& c) { return format_double(c.spec.resolved_design().mean_children); }},
        {"cluster_sd",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             DesignSpec d = c.spec.resolved_design();
             d.kernel_sd = parse_double(k, v);
             c.spec.design = d;
         },
         [](const RunConfig& c) { return format_double(c.spec.resolved_design().kernel_sd); }},
        {"calibrate", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.calibrate = parse_bool(k, v); },
         [](const RunConfig& c) { return bool_text(c.spec.calibrate); }},
        {"calibration_reps",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.spec.calibration_reps = static_cast<int>(parse_int(k, v));
         },
         [](const RunConfig& c) { return std::to_string(c.spec.calibration_reps); }},
        {"multiscale", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.multiscale = parse_bool(k, v); },
         [](const RunConfig& c) { return bool_text(c.spec.multiscale); }},
        {"theta_row", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.theta_row = parse_doubles(k, v); },
         [](const RunConfig& c) { return join(c.spec.theta_row, format_double); }},
        {"theta_col", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.theta_col = parse_doubles(k, v); },
         [](const RunConfig& c) { return join(c.spec.theta_col, format_double); }},
        {"p_c", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.p_c = parse_doubles(k, v); },
         [](const RunConfig& c) { return join(c.spec.p_c, format_double); }},
        {"p_z", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.p_z = parse_doubles(k, v); },
         [](const RunConfig& c) { return join(c.spec.p_z, format_double); }},
        {"p_g", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.p_g = parse_doubles(k, v); },
         [](const RunConfig& c) { return join(c.spec.p_g, format_double); }},
        SPATCONF_DOUBLE("beta0", spec.scenario.beta0),
        SPATCONF_DOUBLE("beta_x", spec.scenario.beta_x),
        SPATCONF_DOUBLE("beta_z", spec.scenario.beta_z),
        SPATCONF_DOUBLE("sigma_c2", spec.scenario.sigma_c2),
        SPATCONF_DOUBLE("sigma_u2", spec.scenario.sigma_u2),
        SPATCONF_DOUBLE("sigma_z2", spec.scenario.sigma_z2),
        SPATCONF_DOUBLE("tau2", spec.scenario.tau2),
        SPATCONF_DOUBLE("rho", spec.scenario.rho),
        SPATCONF_DOUBLE("nu", spec.scenario.nu),
        SPATCONF_DOUBLE("sigma_h2", spec.scenario.sigma_h2),
        {"theta_h",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v.empty() || v == "auto") c.spec.scenario.theta_h.reset();
             else c.spec.scenario.theta_h = parse_double(k, v);
         },
         [](const RunConfig& c) {
             return c.spec.scenario.theta_h ? format_double(*c.spec.scenario.theta_h) : std::string("auto");
         }},
        SPATCONF_DOUBLE("mu_x", spec.scenario.mu_x),
        SPATCONF_DOUBLE("mu_z", spec.scenario.mu_z),
        SPATCONF_DOUBLE("nu_fit", spec.nu_fit),
        {"criterion",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "ML") c.spec.criterion = Criterion::ML;
             else if (v == "REML") c.spec.criterion = Criterion::REML;
             else throw DomainError("setting " + k + ": expected ML or REML, got '" + v + "'");
         },
         [](const RunConfig& c) { return std::string(c.spec.criterion == Criterion::ML ? "ML" : "REML"); }},
        {"spline_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.spline_k = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.spec.spline_k); }},
        {"edf_ladder", [](RunConfig& c, const std::string& k, const std::string& v) { c.spec.edf_ladder = parse_ints(k, v); },
         [](const RunConfig& c) { return join(c.spec.edf_ladder, [](int t) { return std::to_string(t); }); }},
    };
    return table;
}

#undef SPATCONF_DOUBLE

} // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& s : settings()) out.emplace_back(s.key);
        return out;
    }();
    return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
    for (const auto& s : settings()) {
        if (key == s.key) {
            s.set(config, key, value);
            return;
        }
    }
    throw DomainError("unknown setting '" + key + "'");
}

void apply_settings(RunConfig& config, const std::vector<ConfigEntry>& entries) {
    for (const auto& e : entries) {
        try {
            apply_setting(config, e.key, e.value);
        } catch (const DomainError& err) {
            throw DomainError("line " + std::to_string(e.line) + ": " + err.what());
        }
    }
}

std::vector<std::pair<std::string, std::string>> to_settings(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : settings()) out.emplace_back(s.key, s.get(config));
    return out;
}

void write_manifest(std::ostream& os, const RunConfig& config, double wall_seconds, const std::string& csv_name) {
    os << "# spatconf run manifest\n";
    os << "# version: " << library_version() << '\n';
    os << "# csv: " << csv_name << '\n';
    os << "# wall_time_seconds: " << format_double(wall_seconds) << '\n';
    for (const auto& [k, v] : to_settings(config)) os << k << '=' << v << '\n';
}

} // namespace spatconf
