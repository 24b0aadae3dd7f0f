#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nhsd/cavity.hpp"
#include "nhsd/geometry.hpp"
#include "nhsd/nonbloch.hpp"

// Configuration parsing (flat key-value text, strict), deterministic CSV and
// JSON serialization, and the resolved-config manifest.

namespace nhsd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelParams model;           // radians (converted from units of pi)
    CavityParams cavity;
    int n_cells = 40;
    int n_k = 256;
    std::vector<double> mu_list;
    int dw_points = 512;
    NoiseSpec noise;
    std::uint64_t seed = 1;
    std::string out_format = "csv";

    std::map<std::string, std::string> resolved;  // every key, defaults included
    std::set<std::string> defaulted;              // keys filled from defaults
};

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "delta1_pi", "delta2_pi", "eta_pi", "gamma_pi", "n_cells", "n_k",
        "cavity_t", "omega_fsr", "kappa", "mu_list", "dw_points",
        "noise_enabled", "noise_sigma_rel", "noise_floor_frac", "seed",
        "out_format"};
    return keys;
}

inline double parse_double_at(const std::string& v, const std::string& file, int line) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) ++pos;
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(file + ":" + std::to_string(line) + ": not a number: '" + v + "'");
    }
}

}  // namespace detail

/// Strict flat key-value parser.  Unknown keys, malformed lines, out-of-range
/// values and missing required keys are ConfigErrors with file:line context.
/// Values for the couplings are given in units of pi and converted to radians.
inline RunConfig parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);

    std::map<std::string, std::pair<std::string, int>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto notspace = [](unsigned char c) { return !std::isspace(c); };
        line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
        line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
        val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));
        if (!detail::known_keys().contains(key))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (kv.contains(key))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = {val, lineno};
    }

    std::vector<std::string> missing;
    for (const char* req : {"delta1_pi", "delta2_pi", "eta_pi", "gamma_pi"})
        if (!kv.contains(req)) missing.push_back(req);
    if (!missing.empty()) {
        std::string msg = path + ": missing required keys:";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg);
    }

    RunConfig cfg;
    const auto getd = [&](const std::string& key, double def) {
        if (auto it = kv.find(key); it != kv.end())
            return detail::parse_double_at(it->second.first, path, it->second.second);
        cfg.defaulted.insert(key);
        return def;
    };
    const auto geti = [&](const std::string& key, int def) {
        return static_cast<int>(getd(key, def));
    };

    const double d1 = getd("delta1_pi", 0.0), d2 = getd("delta2_pi", 0.0);
    const double et = getd("eta_pi", 0.0), ga = getd("gamma_pi", 0.0);
    cfg.model = ModelParams::from_pi_units(d1, d2, et, ga);
    if (!cfg.model.finite()) throw ConfigError(path + ": non-finite model parameters");
    if (!(cfg.model.delta1 > 0.0)) {
        const int ln = kv.contains("delta1_pi") ? kv["delta1_pi"].second : 0;
        throw ConfigError(path + ":" + std::to_string(ln) + ": delta1 must be > 0");
    }

    cfg.n_cells = geti("n_cells", 40);
    cfg.n_k = geti("n_k", 256);
    if (cfg.n_cells < 2 || cfg.n_cells > 200)
        throw ConfigError(path + ": n_cells out of range [2, 200]");
    if (cfg.n_k < 16) throw ConfigError(path + ": n_k out of range (>= 16)");

    cfg.cavity.t = getd("cavity_t", 0.9);
    cfg.cavity.omega_fsr = getd("omega_fsr", 1.0);
    cfg.cavity.kappa = getd("kappa", 1.0);
    if (!(cfg.cavity.t > 0.0 && cfg.cavity.t < 1.0))
        throw ConfigError(path + ": cavity_t out of range (0, 1)");

    if (auto it = kv.find("mu_list"); it != kv.end()) {
        std::stringstream ss(it->second.first);
        std::string tok;
        while (std::getline(ss, tok, ','))
            cfg.mu_list.push_back(detail::parse_double_at(tok, path, it->second.second));
        if (cfg.mu_list.empty())
            throw ConfigError(path + ":" + std::to_string(it->second.second) + ": empty mu_list");
    } else {
        cfg.defaulted.insert("mu_list");
        cfg.mu_list = {0.0};
    }

    cfg.dw_points = geti("dw_points", 512);
    if (cfg.dw_points < 16) throw ConfigError(path + ": dw_points out of range (>= 16)");
    cfg.noise.enabled = geti("noise_enabled", 0) != 0;
    cfg.noise.sigma_rel = getd("noise_sigma_rel", 0.02);
    cfg.noise.floor_frac = getd("noise_floor_frac", 1e-4);
    cfg.seed = static_cast<std::uint64_t>(getd("seed", 1));
    cfg.noise.seed = cfg.seed;
    if (auto it = kv.find("out_format"); it != kv.end()) {
        cfg.out_format = it->second.first;
        if (cfg.out_format != "csv" && cfg.out_format != "json")
            throw ConfigError(path + ":" + std::to_string(it->second.second) +
                              ": out_format must be csv or json");
    } else {
        cfg.defaulted.insert("out_format");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Deterministic number formatting (17 significant digits, locale-free).
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
    std::array<char, 40> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

// ---------------------------------------------------------------------------
// CSV / JSON emitters.
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : os_(path, std::ios::binary) {
        if (!os_) throw std::runtime_error("CsvWriter: cannot open " + path);
        for (std::size_t i = 0; i < header.size(); ++i)
            os_ << (i ? "," : "") << header[i];
        os_ << "\n";
    }

    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            os_ << (i ? "," : "") << fmt_double(vals[i]);
        os_ << "\n";
    }

    void row_mixed(const std::vector<std::string>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            os_ << (i ? "," : "") << vals[i];
        os_ << "\n";
    }

private:
    std::ofstream os_;
};

/// Per-mu spectra: columns k, re_E_plus, im_E_plus, re_E_minus, im_E_minus.
inline void write_spectra_csv(const std::string& path, const BandLoop& plus,
                              const BandLoop& minus) {
    CsvWriter w(path, {"k", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus"});
    const std::size_t n = std::min(plus.size(), minus.size());
    for (std::size_t j = 0; j < n; ++j) {
        const auto& a = plus.samples[j];
        const auto& b = minus.samples[j];
        w.row({a.k, a.energy.real(), a.energy.imag(), b.energy.real(), b.energy.imag()});
    }
}

inline void write_trace_csv(const std::string& path, const std::vector<ScanPoint>& pts) {
    CsvWriter w(path, {"k", "dw", "intensity"});
    for (const auto& pt : pts) {
        if (!pt.ok && pt.trace.detunings.empty()) continue;
        for (std::size_t i = 0; i < pt.trace.detunings.size(); ++i)
            w.row({pt.k, pt.trace.detunings[i], pt.trace.intensities[i]});
    }
}

inline void write_intersections_csv(const std::string& path,
                                    const std::vector<IntersectionPoint>& pts) {
    CsvWriter w(path, {"mu", "re_E", "im_E", "k_a", "k_b", "re_beta_a", "im_beta_a",
                       "re_beta_b", "im_beta_b", "qualifies", "ambiguous",
                       "contact_angle_deg"});
    for (const auto& ip : pts) {
        w.row({ip.mu, ip.energy.real(), ip.energy.imag(), ip.k_pair.first,
               ip.k_pair.second, ip.beta_pair.first.real(), ip.beta_pair.first.imag(),
               ip.beta_pair.second.real(), ip.beta_pair.second.imag(),
               ip.qualifies_as_obc ? 1.0 : 0.0, ip.ambiguous ? 1.0 : 0.0,
               ip.contact_angle_deg});
    }
}

inline void write_ep_csv(const std::string& path,
                         const std::vector<ExceptionalPointReport>& eps) {
    CsvWriter w(path, {"factor", "mu", "k", "re_beta", "im_beta"});
    for (const auto& r : eps) {
        w.row_mixed({r.which_factor == EpFactor::E1 ? "E1" : "E2", fmt_double(r.mu),
                     fmt_double(r.k), fmt_double(r.beta.real()), fmt_double(r.beta.imag())});
    }
}

inline void write_ronkin_csv(const std::string& path, const RonkinGrid& g) {
    CsvWriter w(path, {"e_re", "e_im", "mu", "V"});
    for (std::size_t i = 0; i < g.e_refs.size(); ++i)
        for (std::size_t j = 0; j < g.mus.size(); ++j) {
            const double v = g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            w.row_mixed({fmt_double(g.e_refs[i].real()), fmt_double(g.e_refs[i].imag()),
                         fmt_double(g.mus[j]), std::isnan(v) ? "nan" : fmt_double(v)});
        }
}

/// Row-major matrix export with "re,im" cell pairs.
inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXcd& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_matrix_csv: cannot open " + path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) os << ",";
            os << fmt_double(m(r, c).real()) << "," << fmt_double(m(r, c).imag());
        }
        os << "\n";
    }
}

inline nlohmann::ordered_json config_manifest(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["model"] = {{"delta1_pi", cfg.model.delta1 / pi},
                  {"delta2_pi", cfg.model.delta2 / pi},
                  {"eta_pi", cfg.model.eta / pi},
                  {"gamma_pi", cfg.model.gamma / pi}};
    j["n_cells"] = cfg.n_cells;
    j["n_k"] = cfg.n_k;
    j["cavity"] = {{"t", cfg.cavity.t},
                   {"omega_fsr", cfg.cavity.omega_fsr},
                   {"kappa", cfg.cavity.kappa}};
    j["scan"] = {{"mu_list", cfg.mu_list},
                 {"dw_points", cfg.dw_points},
                 {"noise_enabled", cfg.noise.enabled},
                 {"noise_sigma_rel", cfg.noise.sigma_rel},
                 {"noise_floor_frac", cfg.noise.floor_frac},
                 {"seed", cfg.seed}};
    j["out_format"] = cfg.out_format;
    j["defaulted_keys"] = std::vector<std::string>(cfg.defaulted.begin(), cfg.defaulted.end());
    return j;
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_json: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace nhsd
