#ifndef ZK_DECOMPOSITION_HPP
#define ZK_DECOMPOSITION_HPP

#include <array>
#include <optional>
#include <vector>

#include "zk/family.hpp"
#include "zk/grid.hpp"
#include "zk/spectrum.hpp"

namespace zk {

// Everything project() needs, realized once on a grid: the eigenmode fields
// F_k^{+-,j}, their L-images, the kernel/generalized-kernel directions and
// the normalization scalars.
struct DecompositionContext {
    GridPtr grid;
    double c_star = 0.0;
    int n0 = 1;
    bool critical = false;
    UnstableSpectrum spectrum;  // normalized

    Field Q, dxQ, dcQ;
    double dxQ_norm2 = 0.0;
    double dcQ_Q = 0.0;  // <dcQ, Q>

    Field psi_c, psi_s;  // kernel modes at critical speed (empty otherwise)
    double psi_c_norm2 = 0.0;
    double psi_s_norm2 = 0.0;

    struct ModeSet {
        int k = 0;
        double lambda = 0.0;
        // j = 0 (cos), 1 (sin)
        std::array<Field, 2> Fp, Fm, LFp, LFm;
    };
    std::vector<ModeSet> modes;
};

DecompositionContext make_decomposition_context(const UnstableSpectrum& normalized_spec,
                                                const GridPtr& grid);

// Coefficient vector of the spectral projection of Prop-style decomposition:
// u = sum Lambda^{+} F^{+} + sum Lambda^{-} F^{-} + mu1 dxQ + mu2 dcQ
//     [+ a0 psi_c + a1 psi_s] + gamma.
struct Components {
    std::vector<double> lambda_plus;   // flattened (pair, j)
    std::vector<double> lambda_minus;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double a0 = 0.0;
    double a1 = 0.0;
    Field gamma;
    double kappa = 0.1;
    double c_star = 0.0;
    bool critical = false;
};

Components project(const DecompositionContext& ctx, const Field& u, double kappa);
Field reconstruct(const DecompositionContext& ctx, const Components& comp);

// Quadratic form <u, L_{c*} u> = int |grad u|^2 + c* u^2 - 2 Q_{c*} u^2.
double l_form(const DecompositionContext& ctx, const Field& u);

// Weighted energy norm; throws if the coercive block is negative beyond
// rounding (broken projection).
double e_kappa_norm(const DecompositionContext& ctx, const Components& comp);

// Norm of the discrete (non-gamma) part only.
double p_d_norm(const Components& comp);

// Unstable-sector norm sqrt(sum (Lambda^+)^2).
double p_plus_norm(const Components& comp);

double e_kappa_of_field(const DecompositionContext& ctx, const Field& u, double kappa);

// Pair norm ||(v, c)||_{E_kappa} with the log-speed deviation from c*.
double e_kappa_pair(const DecompositionContext& ctx, const Field& v, double c, double kappa);

// The plateau function phi (1 below C2, identity above 2*C2, smooth blend)
// entering the shift-penalty weight of the mobile distance.
double plateau(double r);
double phi_delta(const DecompositionContext& ctx, const Field& v, double delta, double kappa);

struct MobileDistanceDetail {
    double value = 0.0;
    double q = 0.0;     // minimizing shift
    int j = 0;          // minimizing orientation
    double term_pd = 0.0;
    double term_inner = 0.0;
    double term_logc = 0.0;
};

// Quasi-metric m_{delta,kappa} comparing (v0, c0) and (v1, c1) up to an
// optimized x-translation of the gamma parts.
double mobile_distance(const DecompositionContext& ctx, const Field& v0, double c0,
                       const Field& v1, double c1, double delta, double kappa);
MobileDistanceDetail mobile_distance_detail(const DecompositionContext& ctx, const Field& v0,
                                            double c0, const Field& v1, double c1,
                                            double delta, double kappa);

// Modulation decomposition u = tau_rho (v + Q_c) with
// (v, dxQ_{c*}) = (v, Q_{c*}) = 0.
struct ModulationState {
    Field v;
    double c = 0.0;
    double rho = 0.0;
    std::optional<AmplitudePair> a;  // critical-speed case
    std::vector<double> residuals;   // orthogonality inner products
    double tube_dist = 0.0;
};

ModulationState orthogonality_solve(const DecompositionContext& ctx, const Field& u,
                                    double tube_radius = 0.5);

// Critical-speed variant u = tau_rho (v + Theta(a, c)) with the four
// orthogonality conditions against {Theta, dx Theta, da0 Theta, da1 Theta}.
ModulationState critical_orthogonality_solve(const DecompositionContext& ctx,
                                             const ModulatedFamily& family, const Field& u,
                                             double tube_radius = 0.5);

}  // namespace zk

#endif
