// Command-line front end: assumption certification, runs, verification
// suites and decay fits, wired to the line-oriented config format.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "qmxw/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"quasilinear Maxwell laboratory"};
    app.require_subcommand(1);

    qmxw::CommandOptions opt;
    if (const char* env = std::getenv("QMXW_WORKERS")) opt.workers = std::atoi(env);
    if (opt.workers < 1) opt.workers = 1;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", opt.config_path, "scenario config file")->required();
        sub->add_option("--workers", opt.workers, "worker thread count");
        sub->add_flag("--force", opt.force, "proceed past failed assumption checks");
        sub->add_option("--out-dir", opt.out_dir, "directory prefix for outputs");
        sub->add_option_function<std::uint64_t>(
            "--seed-override",
            [&opt](const std::uint64_t& v) { opt.seed_override = v; },
            "replace the initial-data seed");
    };

    CLI::App* check = app.add_subcommand("check-assumptions",
                                         "certify material/impedance/domain hypotheses");
    add_common(check, true);

    CLI::App* runcmd = app.add_subcommand("run", "time-step a scenario and write artifacts");
    add_common(runcmd, true);

    std::string which = "all";
    CLI::App* verify = app.add_subcommand("verify", "run diagnostic suites");
    add_common(verify, true);
    verify->add_option("--which", which, "energy|multiplier|divcurl|compat|all");

    std::string trace_path;
    double t_lo = 0.0, t_hi = 0.0;
    CLI::App* fit = app.add_subcommand("decay-fit", "fit exponential decay rates to a trace");
    fit->add_option("--trace", trace_path, "trace CSV path")->required();
    fit->add_option("--t-lo", t_lo, "window start");
    fit->add_option("--t-hi", t_hi, "window end (default: last row)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) return qmxw::cmd_check_assumptions(opt);
        if (runcmd->parsed()) return qmxw::cmd_run(opt);
        if (verify->parsed()) return qmxw::cmd_verify(opt, which);
        if (fit->parsed()) return qmxw::cmd_decay_fit(trace_path, t_lo, t_hi);
    } catch (const qmxw::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.error_class());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
