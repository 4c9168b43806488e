#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "echo_recovery.hpp"
#include "errors.hpp"
#include "freq_init.hpp"
#include "mmrelax.hpp"
#include "signal_model.hpp"

namespace onebit {

enum class RfiMode { table5, file, none };

inline const char* to_string(RfiMode m)
{
    switch (m) {
    case RfiMode::table5: return "table5";
    case RfiMode::file: return "file";
    case RfiMode::none: return "none";
    }
    return "?";
}

/// Six scatterers spread over the fast-time window; positions are fractions of N.
inline constexpr double kDefaultTargetFractions[] = {0.12, 0.27, 0.41, 0.56, 0.71, 0.86};
inline constexpr double kDefaultTargetAmplitudes[] = {300.0, 250.0, 390.0, 280.0, 350.0, 320.0};

struct ExperimentConfig {
    Index n_fast = 512;
    Index m_slow = 8192;
    double fs = 8e9;
    double h = 400.0;
    Index pulse_length = 21;
    double band_lo = 300e6;
    double band_hi = 1100e6;
    std::vector<Target> targets; ///< empty: the default six, scaled to N

    RfiMode rfi_mode = RfiMode::table5;
    std::string rfi_file;
    std::optional<double> a1;   ///< fixed first-source amplitude; otherwise solved from sinr_db
    double sinr_db = -35.0;
    double inr_db = 10.0;
    double noise_std = 0.0;     ///< used only when rfi_mode == none

    std::uint64_t seed = 1;
    Index k_max = 7;
    bool lambda_from_fi = true;
    MmConfig mm{};
    FiConfig fi{};
    ErConfig er{};

    std::vector<double> sweep_sinr_db{-30.0, -35.0, -40.0};
    std::vector<double> sweep_inr_db{0.0, 10.0};

    /// Full-size settings (M = 8192).
    static ExperimentConfig full() { return {}; }

    /// Desk-scale preset: M = 512, everything else unchanged.
    static ExperimentConfig desk()
    {
        ExperimentConfig c;
        c.m_slow = 512;
        return c;
    }

    std::vector<Target> resolved_targets() const
    {
        if (!targets.empty()) return targets;
        std::vector<Target> out;
        for (std::size_t i = 0; i < std::size(kDefaultTargetFractions); ++i) {
            const auto pos = static_cast<Index>(std::lround(kDefaultTargetFractions[i] * static_cast<double>(n_fast)));
            out.push_back({pos, kDefaultTargetAmplitudes[i]});
        }
        return out;
    }

    void validate() const
    {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) throw ConfigError(msg);
        };
        need(n_fast >= pulse_length, "config: N must be >= pulse_length");
        need(m_slow >= 2, "config: M must be >= 2");
        need(h > 0.0, "config: h must be positive");
        need(fs > 2.0 * band_hi && band_lo > 0.0 && band_hi > band_lo, "config: invalid pulse band");
        need(pulse_length >= 3 && pulse_length % 2 == 1, "config: pulse_length must be odd");
        need(k_max >= 1, "config: k_max must be >= 1");
        need(noise_std >= 0.0, "config: noise_std must be >= 0");
        need(!a1 || *a1 > 0.0, "config: a1 must be positive");
        need(rfi_mode != RfiMode::file || !rfi_file.empty(), "config: rfi=file needs rfi_file");
        for (const auto& t : resolved_targets())
            need(t.position >= 0 && t.position < n_fast, "config: target position outside [0, N)");
        try {
            mm.validate();
            fi.validate();
            er.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

namespace detail {

inline std::string fmt_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(",;"));
    std::vector<double> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (p.empty()) continue;
        try {
            out.push_back(boost::lexical_cast<double>(p));
        } catch (const boost::bad_lexical_cast&) {
            throw ConfigError("config: bad number in " + key + ": '" + p + "'");
        }
    }
    return out;
}

inline std::vector<Target> parse_targets(const std::string& text)
{
    std::vector<std::string> parts;
    boost::split(parts, text, boost::is_any_of(",;"));
    std::vector<Target> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (p.empty()) continue;
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw ConfigError("config: target must be position:amplitude, got '" + p + "'");
        try {
            out.push_back({boost::lexical_cast<Index>(boost::trim_copy(p.substr(0, colon))),
                           boost::lexical_cast<double>(boost::trim_copy(p.substr(colon + 1)))});
        } catch (const boost::bad_lexical_cast&) {
            throw ConfigError("config: bad target '" + p + "'");
        }
    }
    return out;
}

template <class T>
T config_value(const std::string& key, const std::string& text)
{
    try {
        if constexpr (std::is_same_v<T, bool>) {
            const std::string v = boost::to_lower_copy(text);
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw boost::bad_lexical_cast();
        } else {
            return boost::lexical_cast<T>(text);
        }
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigError("config: bad value for " + key + ": '" + text + "'");
    }
}

} // namespace detail

/**
 * Applies flat key=value text on top of `base`. Lines starting with '#' or
 * ';' are comments. `preset = desk|full` (if present) resets the base
 * before the other keys apply. Unknown keys are rejected.
 */
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = ExperimentConfig::desk())
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    for (const auto& kv : tree)
        if (!kv.second.empty()) throw ConfigError("config: sections are not supported ([" + kv.first + "])");

    ExperimentConfig c = std::move(base);
    if (auto p = tree.get_optional<std::string>("preset")) {
        if (*p == "desk") c = ExperimentConfig::desk();
        else if (*p == "full") c = ExperimentConfig::full();
        else throw ConfigError("config: unknown preset '" + *p + "'");
    }

    for (const auto& kv : tree) {
        const std::string& key = kv.first;
        const std::string val = boost::trim_copy(kv.second.data());
        using detail::config_value;
        if (key == "preset") continue;
        else if (key == "N") c.n_fast = config_value<Index>(key, val);
        else if (key == "M") c.m_slow = config_value<Index>(key, val);
        else if (key == "fs") c.fs = config_value<double>(key, val);
        else if (key == "h") c.h = config_value<double>(key, val);
        else if (key == "pulse_length") c.pulse_length = config_value<Index>(key, val);
        else if (key == "band_lo") c.band_lo = config_value<double>(key, val);
        else if (key == "band_hi") c.band_hi = config_value<double>(key, val);
        else if (key == "targets") c.targets = detail::parse_targets(val);
        else if (key == "rfi") {
            if (val == "table5") c.rfi_mode = RfiMode::table5;
            else if (val == "file") c.rfi_mode = RfiMode::file;
            else if (val == "none") c.rfi_mode = RfiMode::none;
            else throw ConfigError("config: rfi must be table5, file or none");
        }
        else if (key == "rfi_file") c.rfi_file = val;
        else if (key == "a1") c.a1 = config_value<double>(key, val);
        else if (key == "sinr_db") c.sinr_db = config_value<double>(key, val);
        else if (key == "inr_db") c.inr_db = config_value<double>(key, val);
        else if (key == "noise_std") c.noise_std = config_value<double>(key, val);
        else if (key == "seed") c.seed = config_value<std::uint64_t>(key, val);
        else if (key == "k_max") c.k_max = config_value<Index>(key, val);
        else if (key == "lambda_from_fi") c.lambda_from_fi = config_value<bool>(key, val);
        else if (key == "T_M") c.mm.t_m = config_value<int>(key, val);
        else if (key == "T_C") c.mm.t_c = config_value<int>(key, val);
        else if (key == "mm_tol_outer") c.mm.tol_outer = config_value<double>(key, val);
        else if (key == "mm_tol_inner") c.mm.tol_inner = config_value<double>(key, val);
        else if (key == "N1_factor") c.mm.n1_factor = config_value<Index>(key, val);
        else if (key == "exhaustive_init") c.mm.exhaustive_init = config_value<bool>(key, val);
        else if (key == "Q") c.fi.grid_size = config_value<Index>(key, val);
        else if (key == "zeta1") c.fi.zeta1 = config_value<double>(key, val);
        else if (key == "fi_eps_abs") c.fi.tol.eps_abs = config_value<double>(key, val);
        else if (key == "fi_eps_rel") c.fi.tol.eps_rel = config_value<double>(key, val);
        else if (key == "fi_eps_lambda") c.fi.tol.eps_lambda = config_value<double>(key, val);
        else if (key == "fi_admm_cap") c.fi.admm_cap = config_value<int>(key, val);
        else if (key == "fi_mm_cap") c.fi.mm_cap = config_value<int>(key, val);
        else if (key == "fi_mm_tol") c.fi.mm_tol = config_value<double>(key, val);
        else if (key == "zeta2") c.er.zeta2 = config_value<double>(key, val);
        else if (key == "er_eps_abs") c.er.tol.eps_abs = config_value<double>(key, val);
        else if (key == "er_eps_rel") c.er.tol.eps_rel = config_value<double>(key, val);
        else if (key == "er_eps_lambda") c.er.tol.eps_lambda = config_value<double>(key, val);
        else if (key == "er_admm_cap") c.er.admm_cap = config_value<int>(key, val);
        else if (key == "er_mm_cap") c.er.mm_cap = config_value<int>(key, val);
        else if (key == "er_mm_tol") c.er.mm_tol = config_value<double>(key, val);
        else if (key == "sweep_sinr_db") c.sweep_sinr_db = detail::parse_list(key, val);
        else if (key == "sweep_inr_db") c.sweep_inr_db = detail::parse_list(key, val);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = ExperimentConfig::desk())
{
    std::ifstream is(path);
    if (!is) throw MissingFile("cannot open config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

/// key=value text that parse_config maps back to the same settings.
inline std::string to_config_text(const ExperimentConfig& c)
{
    using detail::fmt_double;
    std::ostringstream os;
    auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
    auto join = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
        return s;
    };
    line("N", std::to_string(c.n_fast));
    line("M", std::to_string(c.m_slow));
    line("fs", fmt_double(c.fs));
    line("h", fmt_double(c.h));
    line("pulse_length", std::to_string(c.pulse_length));
    line("band_lo", fmt_double(c.band_lo));
    line("band_hi", fmt_double(c.band_hi));
    if (!c.targets.empty()) {
        std::string t;
        for (std::size_t i = 0; i < c.targets.size(); ++i)
            t += (i ? "," : "") + std::to_string(c.targets[i].position) + ":" + fmt_double(c.targets[i].amplitude);
        line("targets", t);
    }
    line("rfi", to_string(c.rfi_mode));
    if (!c.rfi_file.empty()) line("rfi_file", c.rfi_file);
    if (c.a1) line("a1", fmt_double(*c.a1));
    line("sinr_db", fmt_double(c.sinr_db));
    line("inr_db", fmt_double(c.inr_db));
    line("noise_std", fmt_double(c.noise_std));
    line("seed", std::to_string(c.seed));
    line("k_max", std::to_string(c.k_max));
    line("lambda_from_fi", c.lambda_from_fi ? "true" : "false");
    line("T_M", std::to_string(c.mm.t_m));
    line("T_C", std::to_string(c.mm.t_c));
    line("mm_tol_outer", fmt_double(c.mm.tol_outer));
    line("mm_tol_inner", fmt_double(c.mm.tol_inner));
    line("N1_factor", std::to_string(c.mm.n1_factor));
    line("exhaustive_init", c.mm.exhaustive_init ? "true" : "false");
    line("Q", std::to_string(c.fi.grid_size));
    line("zeta1", fmt_double(c.fi.zeta1));
    line("fi_eps_abs", fmt_double(c.fi.tol.eps_abs));
    line("fi_eps_rel", fmt_double(c.fi.tol.eps_rel));
    line("fi_eps_lambda", fmt_double(c.fi.tol.eps_lambda));
    line("fi_admm_cap", std::to_string(c.fi.admm_cap));
    line("fi_mm_cap", std::to_string(c.fi.mm_cap));
    line("fi_mm_tol", fmt_double(c.fi.mm_tol));
    line("zeta2", fmt_double(c.er.zeta2));
    line("er_eps_abs", fmt_double(c.er.tol.eps_abs));
    line("er_eps_rel", fmt_double(c.er.tol.eps_rel));
    line("er_eps_lambda", fmt_double(c.er.tol.eps_lambda));
    line("er_admm_cap", std::to_string(c.er.admm_cap));
    line("er_mm_cap", std::to_string(c.er.mm_cap));
    line("er_mm_tol", fmt_double(c.er.mm_tol));
    line("sweep_sinr_db", join(c.sweep_sinr_db));
    line("sweep_inr_db", join(c.sweep_inr_db));
    return os.str();
}

} // namespace onebit
