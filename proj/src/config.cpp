#include "qmxw/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace qmxw {

std::unique_ptr<MaterialLaw> Scenario::make_law() const {
    auto sym = [](const std::array<double, 6>& m) {
        Mat33 out;
        out(0, 0) = m[0]; out(0, 1) = out(1, 0) = m[1]; out(0, 2) = out(2, 0) = m[2];
        out(1, 1) = m[3]; out(1, 2) = out(2, 1) = m[4]; out(2, 2) = m[5];
        return out;
    };
    if (law == "const_iso") return make_constant_isotropic(eps_scale, mu_scale);
    if (law == "const_aniso") return make_constant_anisotropic(sym(eps_matrix), sym(mu_matrix));
    if (law == "var_iso") return make_varying_isotropic(profile, base, coeff, domain.x0);
    if (law == "kerr_iso") return make_kerr_isotropic(eps_base, eps_kerr, mu_base, mu_kerr);
    if (law == "kerr_aniso")
        return make_kerr_anisotropic(sym(eps_matrix), eps_coupling, sym(mu_matrix), mu_coupling);
    if (law == "asym_test") return make_asymmetric_test_law(eps_coupling);
    throw Error(ErrorClass::config, "UNKNOWN_LAW", "no such material law: " + law);
}

std::unique_ptr<Impedance> Scenario::make_impedance() const {
    if (impedance_kind == "scalar") return make_impedance_scalar(impedance_value);
    if (impedance_kind == "diag")
        return make_impedance_diag(impedance_diag.x, impedance_diag.y, impedance_diag.z);
    if (impedance_kind == "nontangential")
        return make_impedance_nontangential(impedance_coupling);
    throw Error(ErrorClass::config, "UNKNOWN_IMPEDANCE",
                "no such impedance kind: " + impedance_kind);
}

bool Scenario::law_is_linear() const {
    return law == "const_iso" || law == "const_aniso" || law == "var_iso";
}

namespace {

struct RawEntry {
    std::string value;
    int line = 0;
    bool consumed = false;
};

struct RawConfig {
    std::string origin;
    std::map<std::string, RawEntry> entries;

    [[noreturn]] void fail(const std::string& msg, int line, int col = 1) const {
        std::ostringstream os;
        os << origin << ":" << line << ":" << col << ": " << msg;
        throw Error(ErrorClass::config, "CONFIG_PARSE", os.str());
    }

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    std::string take(const std::string& key, const std::string& fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        it->second.consumed = true;
        return it->second.value;
    }

    double take_num(const std::string& key, double fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        it->second.consumed = true;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second.value, &used);
            if (used != it->second.value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (...) {
            fail("expected a number for " + key, it->second.line);
        }
    }

    std::vector<double> take_nums(const std::string& key, std::size_t count,
                                  const std::vector<double>& fallback) {
        auto it = entries.find(key);
        if (it == entries.end()) return fallback;
        it->second.consumed = true;
        std::istringstream ss(it->second.value);
        std::vector<double> out;
        double v;
        while (ss >> v) out.push_back(v);
        if (out.size() != count)
            fail("expected " + std::to_string(count) + " numbers for " + key, it->second.line);
        return out;
    }

    void check_all_consumed() const {
        for (const auto& [key, e] : entries)
            if (!e.consumed) fail("unknown key '" + key + "'", e.line);
    }
};

RawConfig tokenize(const std::string& text, const std::string& origin) {
    RawConfig raw;
    raw.origin = origin;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raw.fail("expected 'section.key = value'", lineno, static_cast<int>(first) + 1);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || key.find('.') == std::string::npos)
            raw.fail("key must look like section.key", lineno, 1);
        if (value.empty()) raw.fail("missing value for '" + key + "'", lineno,
                                    static_cast<int>(eq) + 2);
        if (raw.entries.count(key)) raw.fail("duplicate key '" + key + "'", lineno, 1);
        raw.entries[key] = {value, lineno, false};
    }
    return raw;
}

std::uint64_t take_u64(RawConfig& raw, const std::string& key, std::uint64_t fallback) {
    auto it = raw.entries.find(key);
    if (it == raw.entries.end()) return fallback;
    it->second.consumed = true;
    try {
        return std::stoull(it->second.value);
    } catch (...) {
        raw.fail("expected an unsigned integer for " + key, it->second.line);
    }
}

}  // namespace

Scenario parse_config_text(const std::string& text, const std::string& origin) {
    RawConfig raw = tokenize(text, origin);
    Scenario sc;

    auto v3 = [&](const std::string& key, const Vec3& fb) {
        const auto v = raw.take_nums(key, 3, {fb.x, fb.y, fb.z});
        return Vec3{v[0], v[1], v[2]};
    };
    sc.domain.corner = v3("domain.corner", sc.domain.corner);
    sc.domain.extent = v3("domain.extent", sc.domain.extent);
    {
        const auto c = raw.take_nums(
            "domain.cells", 3,
            {static_cast<double>(sc.domain.cells[0]), static_cast<double>(sc.domain.cells[1]),
             static_cast<double>(sc.domain.cells[2])});
        for (int a = 0; a < 3; ++a) sc.domain.cells[a] = static_cast<int>(c[a]);
    }
    sc.domain.x0 = v3("domain.x0", sc.domain.corner + 0.5 * sc.domain.extent);

    sc.law = raw.take("material.law", sc.law);
    if (sc.law == "const_iso") {
        sc.eps_scale = raw.take_num("material.eps_scale", sc.eps_scale);
        sc.mu_scale = raw.take_num("material.mu_scale", sc.mu_scale);
    } else if (sc.law == "const_aniso" || sc.law == "kerr_aniso") {
        auto m6 = [&](const std::string& key, std::array<double, 6>& into) {
            const auto v = raw.take_nums(key, 6, std::vector<double>(into.begin(), into.end()));
            std::copy(v.begin(), v.end(), into.begin());
        };
        m6("material.eps_matrix", sc.eps_matrix);
        m6("material.mu_matrix", sc.mu_matrix);
        if (sc.law == "kerr_aniso") {
            sc.eps_coupling = raw.take_num("material.eps_coupling", sc.eps_coupling);
            sc.mu_coupling = raw.take_num("material.mu_coupling", sc.mu_coupling);
        }
    } else if (sc.law == "var_iso") {
        sc.profile = raw.take("material.profile", sc.profile);
        sc.base = raw.take_num("material.base", sc.base);
        sc.coeff = raw.take_num("material.coeff", sc.coeff);
    } else if (sc.law == "kerr_iso") {
        sc.eps_base = raw.take_num("material.eps_base", sc.eps_base);
        sc.eps_kerr = raw.take_num("material.eps_kerr", sc.eps_kerr);
        sc.mu_base = raw.take_num("material.mu_base", sc.mu_base);
        sc.mu_kerr = raw.take_num("material.mu_kerr", sc.mu_kerr);
    } else if (sc.law == "asym_test") {
        sc.eps_coupling = raw.take_num("material.eps_coupling", sc.eps_coupling);
    } else {
        throw Error(ErrorClass::config, "UNKNOWN_LAW", "no such material law: " + sc.law);
    }

    sc.impedance_kind = raw.take("impedance.kind", sc.impedance_kind);
    if (sc.impedance_kind == "scalar")
        sc.impedance_value = raw.take_num("impedance.value", sc.impedance_value);
    else if (sc.impedance_kind == "diag")
        sc.impedance_diag = v3("impedance.diag", sc.impedance_diag);
    else if (sc.impedance_kind == "nontangential")
        sc.impedance_coupling = raw.take_num("impedance.coupling", sc.impedance_coupling);
    else
        throw Error(ErrorClass::config, "UNKNOWN_IMPEDANCE",
                    "no such impedance kind: " + sc.impedance_kind);

    sc.initial.kind = initial_kind_from_string(
        raw.take("initial.kind", to_string(sc.initial.kind)));
    sc.initial.amplitude = raw.take_num("initial.amplitude", sc.initial.amplitude);
    sc.initial.seed = take_u64(raw, "initial.seed", sc.initial.seed);
    sc.initial.width_frac = raw.take_num("initial.width_frac", sc.initial.width_frac);
    sc.initial.mode_count =
        static_cast<int>(raw.take_num("initial.modes", sc.initial.mode_count));

    const std::string scheme = raw.take("solver.scheme", "midpoint");
    if (scheme == "midpoint")
        sc.solver.scheme = Scheme::midpoint;
    else if (scheme == "leapfrog")
        sc.solver.scheme = Scheme::leapfrog;
    else
        throw Error(ErrorClass::config, "UNKNOWN_SCHEME", "no such scheme: " + scheme);
    sc.solver.dt = raw.take_num("solver.dt", sc.solver.dt);
    sc.solver.cfl = raw.take_num("solver.cfl", sc.solver.cfl);
    sc.solver.t_final = raw.take_num("solver.t_final", sc.solver.t_final);
    sc.solver.newton_tol = raw.take_num("solver.newton_tol", sc.solver.newton_tol);
    sc.solver.newton_max_iter =
        static_cast<int>(raw.take_num("solver.newton_max_iter", sc.solver.newton_max_iter));
    sc.solver.sat_strength = raw.take_num("solver.sat_strength", sc.solver.sat_strength);
    sc.solver.output_stride =
        static_cast<int>(raw.take_num("solver.output_stride", sc.solver.output_stride));
    sc.solver.cfl_override = raw.take("solver.cfl_override", "no") == "yes";

    sc.check_eta = raw.take_num("check.eta", sc.check_eta);
    sc.check_samples = static_cast<int>(raw.take_num("check.samples", sc.check_samples));
    sc.check_seed = take_u64(raw, "check.seed", sc.check_seed);

    sc.out_trace = raw.take("output.trace", sc.out_trace);
    sc.out_checkpoint = raw.take("output.checkpoint", sc.out_checkpoint);
    sc.out_summary = raw.take("output.summary", sc.out_summary);

    raw.check_all_consumed();
    sc.domain.validate();  // includes the strict interiority of x0
    return sc;
}

Scenario parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorClass::config, "CONFIG_PARSE", "cannot open config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string write_config_text(const Scenario& sc) {
    std::ostringstream os;
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto v3 = [&](const Vec3& v) { return num(v.x) + " " + num(v.y) + " " + num(v.z); };
    os << "domain.corner = " << v3(sc.domain.corner) << "\n";
    os << "domain.extent = " << v3(sc.domain.extent) << "\n";
    os << "domain.cells = " << sc.domain.cells[0] << " " << sc.domain.cells[1] << " "
       << sc.domain.cells[2] << "\n";
    os << "domain.x0 = " << v3(sc.domain.x0) << "\n";
    os << "material.law = " << sc.law << "\n";
    auto m6 = [&](const char* key, const std::array<double, 6>& m) {
        os << key << " =";
        for (double v : m) os << " " << num(v);
        os << "\n";
    };
    if (sc.law == "const_iso") {
        os << "material.eps_scale = " << num(sc.eps_scale) << "\n";
        os << "material.mu_scale = " << num(sc.mu_scale) << "\n";
    } else if (sc.law == "const_aniso") {
        m6("material.eps_matrix", sc.eps_matrix);
        m6("material.mu_matrix", sc.mu_matrix);
    } else if (sc.law == "kerr_aniso") {
        m6("material.eps_matrix", sc.eps_matrix);
        m6("material.mu_matrix", sc.mu_matrix);
        os << "material.eps_coupling = " << num(sc.eps_coupling) << "\n";
        os << "material.mu_coupling = " << num(sc.mu_coupling) << "\n";
    } else if (sc.law == "var_iso") {
        os << "material.profile = " << sc.profile << "\n";
        os << "material.base = " << num(sc.base) << "\n";
        os << "material.coeff = " << num(sc.coeff) << "\n";
    } else if (sc.law == "kerr_iso") {
        os << "material.eps_base = " << num(sc.eps_base) << "\n";
        os << "material.eps_kerr = " << num(sc.eps_kerr) << "\n";
        os << "material.mu_base = " << num(sc.mu_base) << "\n";
        os << "material.mu_kerr = " << num(sc.mu_kerr) << "\n";
    } else if (sc.law == "asym_test") {
        os << "material.eps_coupling = " << num(sc.eps_coupling) << "\n";
    }
    os << "impedance.kind = " << sc.impedance_kind << "\n";
    if (sc.impedance_kind == "scalar")
        os << "impedance.value = " << num(sc.impedance_value) << "\n";
    else if (sc.impedance_kind == "diag")
        os << "impedance.diag = " << v3(sc.impedance_diag) << "\n";
    else if (sc.impedance_kind == "nontangential")
        os << "impedance.coupling = " << num(sc.impedance_coupling) << "\n";
    os << "initial.kind = " << to_string(sc.initial.kind) << "\n";
    os << "initial.amplitude = " << num(sc.initial.amplitude) << "\n";
    os << "initial.seed = " << sc.initial.seed << "\n";
    os << "initial.width_frac = " << num(sc.initial.width_frac) << "\n";
    os << "initial.modes = " << sc.initial.mode_count << "\n";
    os << "solver.scheme = " << (sc.solver.scheme == Scheme::midpoint ? "midpoint" : "leapfrog")
       << "\n";
    os << "solver.dt = " << num(sc.solver.dt) << "\n";
    os << "solver.cfl = " << num(sc.solver.cfl) << "\n";
    os << "solver.t_final = " << num(sc.solver.t_final) << "\n";
    os << "solver.newton_tol = " << num(sc.solver.newton_tol) << "\n";
    os << "solver.newton_max_iter = " << sc.solver.newton_max_iter << "\n";
    os << "solver.sat_strength = " << num(sc.solver.sat_strength) << "\n";
    os << "solver.output_stride = " << sc.solver.output_stride << "\n";
    os << "solver.cfl_override = " << (sc.solver.cfl_override ? "yes" : "no") << "\n";
    os << "check.eta = " << num(sc.check_eta) << "\n";
    os << "check.samples = " << sc.check_samples << "\n";
    os << "check.seed = " << sc.check_seed << "\n";
    os << "output.trace = " << sc.out_trace << "\n";
    if (!sc.out_checkpoint.empty()) os << "output.checkpoint = " << sc.out_checkpoint << "\n";
    if (!sc.out_summary.empty()) os << "output.summary = " << sc.out_summary << "\n";
    return os.str();
}

}  // namespace qmxw
