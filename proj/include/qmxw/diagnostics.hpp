#ifndef QMXW_DIAGNOSTICS_HPP
#define QMXW_DIAGNOSTICS_HPP

#include <array>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "qmxw/initdata.hpp"
#include "qmxw/solver.hpp"

namespace qmxw {

/// One diagnostics row. The CSV columns are the first block; the remaining
/// fields are in-memory integrands that let identity checks run on the trace
/// without re-touching snapshots.
struct TraceRow {
    double t = 0.0;
    std::array<double, 4> e{}, d{}, z{};
    double divD = 0.0, divB = 0.0, bc_residual = 0.0;

    // Exact accumulated boundary integrals from the stepper (order-0
    // weights): integral of sum w lambda(ExN).(ExN) and of the penalty
    // remainder. These make the linear-media energy identity checkable to
    // round-off instead of trapezoid accuracy.
    double acc_diss = 0.0, acc_pen = 0.0;

    // Energy-identity integrands per derivative order k.
    std::array<double, 4> en2{};       // ||a^1/2 u_k||^2 + ||b^1/2 v_k||^2
    std::array<double, 4> bnd_rate{};  // 2 * boundary dissipation quadrature of order k
    std::array<double, 4> pen_rate{};  // 2 * penalty remainder of order k
    std::array<double, 4> forcing{};   // 2 * ( <u_k, phi_k> + <v_k, psi_k> )
    std::array<double, 4> dtcoef{};    // <u_k,(dt a)u_k> + <v_k,(dt b)v_k>

    // Observability integrands per order k.
    std::array<double, 4> obs_tr{};      // boundary int of (a u.u + b v.v)
    std::array<double, 4> obs_uxnu{};    // boundary int of |u x nu|^2
    std::array<double, 4> obs_forcing{}; // volume int of |dt phi||v| + |dt psi||u|
    std::array<double, 4> obs_div{};     // volume int of |div phi||u| + |div psi||v|
    std::array<double, 4> l2uv{};        // ||u_k||^2 + ||v_k||^2
    std::array<double, 4> tensor_max{};  // max nodal norm of the order-k weights
};

struct EnergyTrace {
    std::vector<TraceRow> rows;

    int index_at(double t) const;  // closest row index
    bool empty() const { return rows.empty(); }
};

/// Backward/one-sided finite-difference weights for the m-th derivative at
/// x0 over the given nodes (classic recursive construction).
std::vector<double> fd_weights(int m, double x0, const std::vector<double>& nodes);

/// Time-derivative stack at one row: dE[j], dH[j] for j = 0..3, built from a
/// ring of snapshots with order-(4-j) stencils; seeded near t = 0 from the
/// compatibility fields.
struct DerivStack {
    double t = 0.0;
    std::array<Field3, 4> dE, dH;
};

/// Streams solver snapshots into trace rows. Keeps a four-snapshot ring; the
/// first rows are deferred until the ring fills (finalize() flushes them).
class TraceBuilder : public SnapshotSink {
public:
    TraceBuilder(const MaxwellSystem& sys, const InitialData* seed_data = nullptr);

    void on_snapshot(const FieldState& state, const StepAccount& account) override;

    /// Flushes deferred early rows. Must be called once after the run.
    EnergyTrace finalize();

private:
    void emit_row(std::size_t row_index);
    DerivStack build_stack(const std::vector<int>& window, double t_eval,
                           bool seed_with_compat) const;
    TraceRow compute_row(const FieldState& at, const DerivStack& stack,
                         const std::vector<int>& window, double acc_diss, double acc_pen) const;

    const MaxwellSystem& sys_;
    const InitialData* seed_;
    std::deque<FieldState> ring_;      // snapshots backing pending rows
    std::deque<double> ring_diss_, ring_pen_;
    std::vector<TraceRow> rows_;
    std::size_t snapshots_seen_ = 0;
    bool finalized_ = false;
};

// ---- Scalar functionals -----------------------------------------------------

/// e_k, d_k, z_k of a stack (standalone evaluators; TraceBuilder uses the
/// same code path).
double energy_ek(const MaxwellSystem& sys, const DerivStack& stack, const Field3& E_now,
                 const Field3& H_now, int k);
double dissipation_dk(const MaxwellSystem& sys, const DerivStack& stack, int k);
double z_norm_k(const SbpOperators& ops, const DerivStack& stack, int k);

/// int_Omega (m x (alpha u)) . (beta v) dx by the SBP quadrature; alpha/beta
/// empty means identity.
double multiplier_functional(const SbpOperators& ops, const Field3& u, const Field3& v,
                             const std::vector<Mat33>& alpha, const std::vector<Mat33>& beta);

/// || curl(m x (beta v)) - [div(beta v) m - 2 beta v - (m . grad)(beta v)] ||_W
/// with second-order-accurate discrete derivatives (pointwise closures).
double curl_multiplier_identity_check(const SbpOperators& ops, const std::vector<Mat33>& beta,
                                      const Field3& v);

// ---- Identity and inequality checks over a trace ---------------------------

struct EnergyBalanceReport {
    double residual = 0.0;   // |lhs - rhs| normalized by e_k(s) + 1e-30
    double lhs = 0.0, rhs = 0.0;
    bool used_accumulated = false;
};

/// Two-sided energy identity between rows s and t (inclusive, by row index):
/// endpoint weighted norms + boundary losses vs forcing + coefficient-motion
/// terms. k = 0 with midpoint data uses the exact accumulated boundary
/// integrals; higher orders integrate row values by trapezoid.
EnergyBalanceReport energy_balance_residual(const EnergyTrace& trace, int k, int row_s,
                                            int row_t);

struct DissipativityReport {
    double lhs = 0.0;        // e_k(t) + int d_k
    double rhs_base = 0.0;   // e_k(s)
    double int_z32 = 0.0;    // int z_3^{3/2}
    double int_z32_low = 0.0;  // int z_2^{3/2} (coarse-grid variant)
    double minimal_c1 = 0.0;
    double minimal_c1_low = 0.0;
};

DissipativityReport dissipativity_check(const EnergyTrace& trace, int k, int row_s, int row_t);

struct ObservabilityReport {
    double lhs = 0.0, rhs = 0.0, slack = 0.0;
    double constant_m = 0.0;
    bool holds = false;
};

/// Both sides of the multiplier observability bound with the certified
/// star-shape constants. lambda_max enters the constant M.
ObservabilityReport observability_check(const EnergyTrace& trace, int k, int row_s, int row_t,
                                        double kappa, double eta_bar, double m_inf,
                                        double lambda_max);

struct DecayFit {
    double omega = 0.0;
    double prefactor = 0.0;
    double r2 = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    int rows_used = 0;
};

enum class DecayQuantity { e0, e, z };
DecayQuantity decay_quantity_from_string(const std::string& s);

/// Linear regression of log(quantity) on t over the window. Throws
/// NONPOSITIVE_VALUES when the quantity is not strictly positive there.
DecayFit decay_fit(const EnergyTrace& trace, DecayQuantity q, double t_lo, double t_hi);

struct RegularityFit {
    double c5 = 0.0, c6 = 0.0;
    double max_violation_rel = 0.0;  // max (z - c5 e - c6 z^2)+ / z
    std::size_t rows = 0;
};

/// Global fit of z <= c5 e + c6 z^2 over the pooled rows of several runs:
/// nonnegative least squares for the trend, then the minimal inflation that
/// clears the hinge violations. Throws DEGENERATE_FIT when all z vanish.
RegularityFit regularity_fit(const std::vector<const EnergyTrace*>& traces);

// ---- CSV -------------------------------------------------------------------

extern const char* kTraceCsvHeader;

void write_trace_csv(const std::string& path, const EnergyTrace& trace);
EnergyTrace read_trace_csv(const std::string& path);

}  // namespace qmxw

#endif
