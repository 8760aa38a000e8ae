#ifndef QMXW_SOLVER_HPP
#define QMXW_SOLVER_HPP

#include <string>
#include <vector>

#include "qmxw/materials.hpp"
#include "qmxw/sbp.hpp"

namespace qmxw {

/// Collocated field state at one time instant. The cache invariant
/// D = eps(x,E)E and B = mu(x,H)H holds to the Newton tolerance.
struct FieldState {
    double t = 0.0;
    Field3 E, H, D, B;
};

enum class Scheme { midpoint, leapfrog };

struct SolverConfig {
    double dt = 0.0;  // 0: derive from the CFL number
    double cfl = 0.4;
    double t_final = 1.0;
    Scheme scheme = Scheme::midpoint;
    double newton_tol = 1e-12;
    int newton_max_iter = 25;
    double sat_strength = 1.0;
    int output_stride = 1;
    bool cfl_override = false;  // accept dt above the CFL bound, with a warning

    /// Effective time step; throws CFL_VIOLATION when dt exceeds cfl * h_min
    /// and no override is set.
    double resolve_dt(const BoxDomain& box) const;
};

/// Newton inversion of xi |-> T(x, xi) xi with Jacobian eval_linearized.
/// Throws NO_CONVERGENCE / SINGULAR_JACOBIAN.
Vec3 constitutive_invert(const MaterialLaw& law, Tensor which, const Vec3& x,
                         const Vec3& target, Vec3 guess, double tol, int max_iter);

/// Quasilinear Maxwell system on the box with weakly imposed impedance
/// boundary conditions (penalties routed into the magnetic equation as the
/// characteristic flux of the half-space impedance problem, so the electric
/// flux density evolves by a pure discrete curl).
class MaxwellSystem {
public:
    /// Precomputed per-boundary-node data (one entry per incident face).
    struct BoundaryData {
        std::size_t node;
        Vec3 nu, tau1, tau2;
        Mat33 lambda;
        Mat33 lambda_tan_inv;  // inverse on the tangent plane, zero on span{nu}
        double w_surf, w_normal;
    };

    MaxwellSystem(const SbpOperators& ops, const BoundaryFrame& frames,
                  const MaterialLaw& law, const Impedance& lambda, double sat_strength);

    const SbpOperators& ops() const { return *ops_; }
    const BoundaryFrame& frames() const { return *frames_; }
    const MaterialLaw& law() const { return *law_; }
    const Impedance& impedance() const { return *lambda_; }
    double sat_strength() const { return sat_strength_; }

    /// Boundary penalty: contribution to dB/dt at boundary nodes,
    /// -(sat/w_normal) lambda_tan^{-1} (H_tan + lambda (E x nu)) per incident
    /// face. dD/dt receives no penalty. Also evaluates the exact discrete
    /// boundary energy rates: the physical dissipation quadrature
    /// sum w lambda(E x nu).(E x nu) and the penalty remainder, so that
    /// diss_rate + pen_rate is the exact energy loss rate for linear media.
    void sat_boundary_flux(const Field3& E, const Field3& H, Field3& dBdt_add,
                           double& diss_rate, double& pen_rate, double& bc_residual2) const;

    /// Semi-discrete right-hand side: dD/dt = curl H, dB/dt = -curl E + SAT.
    void rhs(const Field3& E, const Field3& H, Field3& dDdt, Field3& dBdt,
             double& diss_rate, double& pen_rate, double& bc_residual2) const;

    /// Recover (E, H) from (D, B) nodewise by Newton, warm-started from the
    /// fields already stored in E and H.
    void recover(const Field3& D, const Field3& B, Field3& E, Field3& H, double tol,
                 int max_iter) const;

    /// Impedance residual norm ||H x nu + (lambda (E x nu)) x nu||_{L2(Gamma)}.
    double bc_residual_norm(const Field3& E, const Field3& H) const;

    const std::vector<BoundaryData>& boundary_data() const { return bdata_; }

private:
    const SbpOperators* ops_;
    const BoundaryFrame* frames_;
    const MaterialLaw* law_;
    const Impedance* lambda_;
    double sat_strength_;
    std::vector<BoundaryData> bdata_;
};

/// Per-step accounting streamed to diagnostics.
struct StepAccount {
    double acc_dissipation = 0.0;  // integral of the boundary dissipation quadrature
    double acc_penalty = 0.0;      // integral of the penalty remainder
    long steps = 0;
};

/// Receives a snapshot every output_stride steps (including t = 0 and the
/// final step).
class SnapshotSink {
public:
    virtual ~SnapshotSink() = default;
    virtual void on_snapshot(const FieldState& state, const StepAccount& account) = 0;
};

/// One step of the configured scheme. Midpoint solves the implicit stage by
/// fixed-point sweeps over (D, B) with nodewise Newton recovery per sweep;
/// leapfrog advances explicitly on staggered time levels.
class Stepper {
public:
    Stepper(const MaxwellSystem& sys, const SolverConfig& cfg, const FieldState& initial);

    const FieldState& state() const { return state_; }
    const StepAccount& account() const { return account_; }
    double dt() const { return dt_; }

    /// Advances by dt (or by signed_dt when nonzero; midpoint only, used by
    /// time-reversibility checks).
    void step(double signed_dt = 0.0);

private:
    void step_midpoint(double dt);
    void step_leapfrog(double dt);

    const MaxwellSystem& sys_;
    SolverConfig cfg_;
    double dt_;
    FieldState state_;
    StepAccount account_;
    bool leapfrog_primed_ = false;
    Field3 B_half_, H_half_;
};

/// Runs the scheme from the initial state to t_final, streaming snapshots.
/// Errors from the stepper propagate annotated with the failing time.
FieldState run(const MaxwellSystem& sys, const SolverConfig& cfg, FieldState initial,
               SnapshotSink* sink);

// ---- Checkpoint file format ------------------------------------------------
// magic "QMXW1", little-endian u32 node counts (nx, ny, nz), f64 time, then
// D, B, E, H arrays in x-fastest node order, 3 little-endian f64 per node.

void write_checkpoint(const std::string& path, const BoxDomain& box, const FieldState& s);
FieldState read_checkpoint(const std::string& path, const BoxDomain& expected_box);

}  // namespace qmxw

#endif
