#ifndef ZK_MANIFOLD_HPP
#define ZK_MANIFOLD_HPP

#include <functional>
#include <string>
#include <vector>

#include "zk/decomposition.hpp"
#include "zk/evolution.hpp"

namespace zk {

// Like evolve(), but invokes the monitor at every snapshot; returning true
// stops the integration early (trajectory truncated at that snapshot).
Trajectory evolve_with_monitor(const Field& u0, const Integrator& integ,
                               const std::function<bool(double, const Field&)>& monitor);

struct GrowthFit {
    double rate = 0.0;        // fitted slope of log |Lambda|
    double lambda_eig = 0.0;  // eigensolver value for the same mode
    double rel_dev = 0.0;
    int n_points = 0;
    double window_t0 = 0.0, window_t1 = 0.0;
};

// Full-nonlinear growth rate of one eigendirection: evolve Q + eps F_k^{s,j},
// track the matching Lambda coefficient, fit the exponential window.
GrowthFit growth_rate(const DecompositionContext& ctx, int k, int j, int sign, double eps,
                      double T, const Integrator& base);

struct ExitInfo {
    bool exited = false;
    double t = 0.0;                    // exit time (or horizon when survived)
    std::vector<double> lambda_plus;   // unstable coefficients at the final state
    int dominant = 0;                  // argmax |lambda_plus|
};

// First snapshot time with inf_q ||u(t) - tau_q Q_{c*}||_{H1} >= eps_tube;
// survival to T_max is a valid outcome.
ExitInfo exit_time(const DecompositionContext& ctx, const Field& u0, double eps_tube,
                   double T_max, const Integrator& base);

struct ShootTrial {
    std::vector<double> b;
    bool survived = false;
    double t_exit = 0.0;
    double exit_sign = 0.0;
};

struct ShootOptions {
    double eps_tube = 0.05;
    double T_target = 0.0;       // 0: use 30 / lambda_1
    double bracket_tol = 1e-6;
    bool require_survival = true;  // keep halving until a trial survives
    int max_trials = 70;
};

struct ShootResult {
    std::vector<double> b_star;   // one entry per unstable coordinate bisected
    double bracket_width = 0.0;
    double t_stay = 0.0;          // survival horizon achieved at b_star
    bool survived = false;
    std::vector<ShootTrial> exit_log;
};

// Bisection on the unstable amplitude(s) so the exit direction flips sign,
// approximating the graph value G_+(w, c*). w must lie in the non-unstable
// sector. y-even data reduces to a single coordinate; otherwise the two
// coordinates are cycled.
ShootResult shoot_graph(const DecompositionContext& ctx, const Field& w,
                        const ShootOptions& opts, const Integrator& base);

enum class StableDirectionKind { GammaEven, GammaK0, MinusEigen };

// Unit-H1 directions in the non-unstable sector used as perturbation
// families. GammaEven mixes k = 0 and k = 1 gamma content (y-even).
Field stable_direction(const DecompositionContext& ctx, StableDirectionKind kind);

struct HolderPoint {
    double eps = 0.0;
    double b_star = 0.0;
    bool dropped = false;  // below the bisection resolution floor
};

struct HolderFit {
    double exponent = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // 95% band
    int n_used = 0;
    std::vector<HolderPoint> points;
};

// log|b_star| vs log eps slope across shooting runs at each eps.
HolderFit holder_probe(const DecompositionContext& ctx, StableDirectionKind kind,
                       const std::vector<double>& eps_list, const ShootOptions& opts,
                       const Integrator& base);

struct QuarticSample {
    double s = 0.0;
    double dS = 0.0;
};

struct QuarticCross {
    double c = 0.0;
    double s = 0.0;
    double dS = 0.0;
    double quartic_term = 0.0;
    double dy_term = 0.0;
    double rel_dev = 0.0;  // |dS - quartic - dy| / |dy|
};

struct QuarticFit {
    double c_star = 0.0;
    std::vector<QuarticSample> samples;
    double coef_fit = 0.0;
    double coef_paper = 0.0;
    double rel_dev = 0.0;
    bool remainder_dominated = false;
    std::vector<QuarticCross> cross;
};

// Quartic expansion of the action difference S_c(Theta(a, beta(a,c))) - S_c(Q_c)
// at and near the critical speed.
QuarticFit lyapunov_quartic_check(ModulatedFamily& family, const std::vector<double>& a_values,
                                  const std::vector<double>& c_values);

struct SweepEntry {
    std::string label;
    double eps = 0.0;
    std::vector<double> b_star;
    double sup_dist_corrected = 0.0;
    bool corrected_survived = false;
    bool uncorrected_exited = false;
    double uncorrected_exit_t = 0.0;
};

struct SweepReport {
    std::vector<SweepEntry> entries;
};

// Applies shoot_graph then evolves corrected/uncorrected data, reporting the
// sup of the tube distance over [0, T].
SweepReport stability_sweep(const DecompositionContext& ctx,
                            const std::vector<StableDirectionKind>& kinds, double eps,
                            double T, const ShootOptions& opts, const Integrator& base);

}  // namespace zk

#endif
