#ifndef QMXW_COMMANDS_HPP
#define QMXW_COMMANDS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qmxw/config.hpp"
#include "qmxw/diagnostics.hpp"

namespace qmxw {

struct CommandOptions {
    std::string config_path;
    int workers = 1;
    bool force = false;
    std::string out_dir;  // prefix applied to relative output paths
    std::optional<std::uint64_t> seed_override;
};

/// Owns one scenario end to end: operators, certification, initial data,
/// run, trace.
class ScenarioRun {
public:
    struct Certification {
        AssumptionReport symmetry, positivity, coercivity, impedance;
        double eta_bar = 0.0;
        bool all_passed() const {
            return symmetry.passed && positivity.passed && coercivity.passed &&
                   impedance.passed && eta_bar > 0.0;
        }
    };

    ScenarioRun(const Scenario& sc, int workers);

    /// Runs every assumption sampler; results in certification().
    void certify();
    /// Builds the initial data (requires certify() when enforcing the
    /// positivity radius; pass force to skip that gate).
    void prepare(bool force = false);
    /// Time-steps to t_final and builds the trace.
    void execute();

    const Scenario& scenario() const { return scenario_; }
    const SbpOperators& ops() const { return *ops_; }
    const BoundaryFrame& frames() const { return *frames_; }
    const MaxwellSystem& system() const { return *system_; }
    const MaterialLaw& law() const { return *law_; }
    const Impedance& impedance() const { return *impedance_; }
    const InitialData& initial() const { return init_; }
    const EnergyTrace& trace() const { return trace_; }
    const FieldState& final_state() const { return final_; }
    const Certification& certification() const { return cert_; }
    double wall_seconds() const { return wall_seconds_; }

    /// Max |m(x)| over the grid and max impedance norm over the boundary
    /// (constants of the observability bound).
    double multiplier_sup() const;
    double impedance_sup() const;

private:
    Scenario scenario_;
    Workers workers_;
    std::unique_ptr<MaterialLaw> law_;
    std::unique_ptr<Impedance> impedance_;
    std::unique_ptr<SbpOperators> ops_;
    std::unique_ptr<BoundaryFrame> frames_;
    std::unique_ptr<MaxwellSystem> system_;
    Certification cert_;
    bool certified_ = false;
    InitialData init_;
    EnergyTrace trace_;
    FieldState final_;
    double wall_seconds_ = 0.0;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<CheckResult> verify_energy(ScenarioRun& run);
std::vector<CheckResult> verify_multiplier(ScenarioRun& run);
std::vector<CheckResult> verify_divcurl(int workers);
std::vector<CheckResult> verify_compat(const Scenario& base, int workers);

/// Convergence order from consecutive error levels under factor-2 refinement
/// (uses the finest pair above the round-off floor).
double observed_order(const std::vector<double>& errors, double floor = 1e-13);

// CLI entry points; return process exit codes.
int cmd_check_assumptions(const CommandOptions& opt);
int cmd_run(const CommandOptions& opt);
int cmd_verify(const CommandOptions& opt, const std::string& which);
int cmd_decay_fit(const std::string& trace_path, double t_lo, double t_hi);

}  // namespace qmxw

#endif
