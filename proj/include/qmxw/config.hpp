#ifndef QMXW_CONFIG_HPP
#define QMXW_CONFIG_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "qmxw/initdata.hpp"
#include "qmxw/materials.hpp"
#include "qmxw/solver.hpp"

namespace qmxw {

/// Full experiment description. Parsed from the line-oriented
/// `section.key = value` format (# comments, unknown keys are hard errors).
struct Scenario {
    BoxDomain domain;

    // material block
    std::string law = "const_iso";
    double eps_scale = 1.0, mu_scale = 1.0;                  // const_iso
    std::array<double, 6> eps_matrix{1, 0, 0, 1, 0, 1};      // const_aniso (xx xy xz yy yz zz)
    std::array<double, 6> mu_matrix{1, 0, 0, 1, 0, 1};
    std::string profile = "quadratic";                       // var_iso
    double base = 1.0, coeff = 0.0;
    double eps_base = 1.0, eps_kerr = 0.0;                   // kerr_iso
    double mu_base = 1.0, mu_kerr = 0.0;
    double eps_coupling = 0.0, mu_coupling = 0.0;            // kerr_aniso

    // impedance block
    std::string impedance_kind = "scalar";  // scalar | diag | nontangential
    double impedance_value = 1.0;
    Vec3 impedance_diag{1, 1, 1};
    double impedance_coupling = 0.3;

    // initial-data block
    InitialParams initial;

    // solver block
    SolverConfig solver;

    // certification block
    double check_eta = 0.5;
    int check_samples = 1000;
    std::uint64_t check_seed = 7;

    // output block
    std::string out_trace = "trace.csv";
    std::string out_checkpoint;
    std::string out_summary;

    std::unique_ptr<MaterialLaw> make_law() const;
    std::unique_ptr<Impedance> make_impedance() const;

    /// True for xi-independent laws (exact energy identities expected).
    bool law_is_linear() const;
};

/// Parses a config file; error messages carry file:line:column.
Scenario parse_config_file(const std::string& path);
Scenario parse_config_text(const std::string& text, const std::string& origin);

/// Serialization that re-parses to an identical Scenario.
std::string write_config_text(const Scenario& sc);

}  // namespace qmxw

#endif
