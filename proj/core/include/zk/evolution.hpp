#ifndef ZK_EVOLUTION_HPP
#define ZK_EVOLUTION_HPP

#include <optional>
#include <vector>

#include "zk/decomposition.hpp"
#include "zk/grid.hpp"

namespace zk {

// Time-stepping controls. The dispersive linear part is exactly diagonal in
// Fourier space, so both schemes propagate it without a CFL restriction.
struct Integrator {
    enum class Scheme { IFRK4, ETDRK4 };
    Scheme scheme = Scheme::IFRK4;
    double dt = 1e-3;
    double t_end = 1.0;
    bool dealias = true;
    bool linear_only = false;  // drop the quadratic term (diagnostics only)
    double guard_umax = 100.0;
    int snapshot_every = 50;
    double action_speed = 0.0;  // c in the recorded action S_c = E + (c/2) M
};

struct Trajectory {
    GridPtr grid;
    double dt = 0.0;       // effective step actually used
    double c_star = 0.0;   // reference speed for localized/tracked series

    // per accepted step
    std::vector<double> diag_t, diag_M, diag_E, diag_S;

    // decimated state snapshots (u for evolve, v for the localized and
    // linearized flows)
    std::vector<double> snap_t;
    std::vector<Field> snaps;

    // per-step modulation scalars recorded by localized_evolve
    std::vector<double> ser_t, ser_c, ser_rho, ser_rho_dot, ser_chi;

    // modulation tracking at snapshot times
    std::vector<double> trk_t, trk_c, trk_rho, trk_v_l2, trk_v_h1, trk_a0, trk_a1;
    std::vector<std::vector<double>> trk_lambda_plus, trk_lambda_minus;
    std::optional<double> exit_t;
    bool critical_tracked = false;
};

// Full equation u_t = -d/dx (Delta u + u^2) with exact spectral linear
// propagation and a dealiased quadratic term.
Trajectory evolve(const Field& u0, const Integrator& integ);

// Localized modulation system for v with cutoff chi_delta on the nonlinear
// remainder; advances (v, c, rho) in the co-moving frame.
Trajectory localized_evolve(const DecompositionContext& ctx, const Field& v0, double c0,
                            double rho0, double delta, const Integrator& integ);

// Time-dependent coefficients of the linearized flow around a modulated
// solution.
class Background {
  public:
    virtual ~Background() = default;
    virtual void sample(double t, Field& v0, double& c0, double& rho_dot) const = 0;
    virtual double horizon() const = 0;
};

// v0 = 0, c0 = c*, rho_dot = c*: the flow frozen at the solitary wave.
class FrozenBackground : public Background {
  public:
    FrozenBackground(GridPtr grid, double c_star);
    void sample(double t, Field& v0, double& c0, double& rho_dot) const override;
    double horizon() const override;

  private:
    GridPtr grid_;
    double c_star_;
};

// Linear interpolation of a localized trajectory's v snapshots and scalars.
class TrajectoryBackground : public Background {
  public:
    explicit TrajectoryBackground(const Trajectory& traj);
    void sample(double t, Field& v0, double& c0, double& rho_dot) const override;
    double horizon() const override;

  private:
    const Trajectory& traj_;
};

// eta_t = dx L_{c*} eta - 2 dx((Q_{c0} - Q_{c*}) eta) + (rho_dot - c*) dx eta
//         - 2 dx(v0 eta).
Trajectory linearized_evolve(const Field& eta0, double c_star, const Background& bg,
                             const Integrator& integ);

// Per-snapshot modulation decomposition along a trajectory of the full
// equation. Tube exit is an event: the series is truncated and exit_t set.
Trajectory modulation_track(const DecompositionContext& ctx, const Trajectory& traj,
                            double tube_radius = 0.5, double kappa = 0.1);
Trajectory modulation_track(const DecompositionContext& ctx, const ModulatedFamily& family,
                            const Trajectory& traj, double tube_radius = 0.5,
                            double kappa = 0.1);

// Smooth cutoff chi(r): 1 for r <= 1, 0 for r >= 2.
double cutoff_chi(double r);

}  // namespace zk

#endif
