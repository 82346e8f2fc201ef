#include "zk/decomposition.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "zk/errors.hpp"
#include "zk/waves.hpp"

namespace zk {

namespace {

constexpr double kPlateauC2 = 10.0;

inline double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// C-infinity monotone step, 0 at t<=0, 1 at t>=1.
inline double smooth_step(double t) {
    const double a = bump(t);
    const double b = bump(1.0 - t);
    return a / (a + b);
}

Field mode_field(const GridPtr& grid, const std::vector<double>& prof, int k, int j,
                 double sign) {
    Field f(grid);
    for (int i = 0; i < grid->nx; ++i) {
        const double p = sign * prof[i];
        for (int jj = 0; jj < grid->ny; ++jj) {
            const double ang = k * grid->y[jj] / grid->L;
            f.at(i, jj) = p * (j == 0 ? std::cos(ang) : std::sin(ang));
        }
    }
    return f;
}

// Circular roll of a field by r cells in x (exact integer-shift translate
// by q = r*dx).
Field roll_x(const Field& f, int r) {
    const auto& g = *f.grid;
    Field out(f.grid);
    const int nx = g.nx;
    for (int i = 0; i < nx; ++i) {
        const int src = ((i - r) % nx + nx) % nx;
        for (int j = 0; j < g.ny; ++j) out.at(i, j) = f.at(src, j);
    }
    return out;
}

template <typename F>
double golden_min(F&& f, double a, double b, double tol) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

DecompositionContext make_decomposition_context(const UnstableSpectrum& spec,
                                                const GridPtr& grid) {
    if (!spec.pairs.empty() && !spec.normalized)
        throw std::invalid_argument(
            "make_decomposition_context: spectrum must be pairing-normalized");
    DecompositionContext ctx;
    ctx.grid = grid;
    ctx.c_star = spec.c_star;
    ctx.n0 = spec.n0;
    ctx.critical = spec.critical;
    ctx.spectrum = spec;

    ctx.Q = line_soliton(spec.c_star, grid);
    const auto d = soliton_derivatives(spec.c_star, grid);
    ctx.dxQ = d.dx;
    ctx.dcQ = d.dc;
    ctx.dxQ_norm2 = inner_l2(ctx.dxQ, ctx.dxQ);
    ctx.dcQ_Q = inner_l2(ctx.dcQ, ctx.Q);

    if (ctx.critical) {
        int n_crit = 0;
        is_critical_speed(spec.c_star, grid->L, &n_crit);
        ctx.psi_c = soliton_32_cos(spec.c_star, n_crit, grid);
        ctx.psi_s = soliton_32_sin(spec.c_star, n_crit, grid);
        ctx.psi_c_norm2 = inner_l2(ctx.psi_c, ctx.psi_c);
        ctx.psi_s_norm2 = inner_l2(ctx.psi_s, ctx.psi_s);
    }

    for (const auto& p : spec.pairs) {
        DecompositionContext::ModeSet ms;
        ms.k = p.k;
        ms.lambda = p.lambda;
        const std::vector<double> fref = reflect_x(grid, p.f);
        std::vector<double> fminus(fref.size());
        for (std::size_t i = 0; i < fref.size(); ++i)
            fminus[i] = -p.pairing_sign * fref[i];
        const std::vector<double> Lf = apply_l_block(spec.c_star, p.k, grid, p.f);
        const std::vector<double> Lfm = apply_l_block(spec.c_star, p.k, grid, fminus);
        for (int j = 0; j < 2; ++j) {
            ms.Fp[j] = mode_field(grid, p.f, p.k, j, 1.0);
            ms.Fm[j] = mode_field(grid, fminus, p.k, j, 1.0);
            ms.LFp[j] = mode_field(grid, Lf, p.k, j, 1.0);
            ms.LFm[j] = mode_field(grid, Lfm, p.k, j, 1.0);
        }
        ctx.modes.push_back(std::move(ms));
    }
    return ctx;
}

Components project(const DecompositionContext& ctx, const Field& u, double kappa) {
    if (!u.grid || !u.grid->same_layout(*ctx.grid))
        throw std::invalid_argument("project: field grid does not match context grid");
    Components comp;
    comp.kappa = kappa;
    comp.c_star = ctx.c_star;
    comp.critical = ctx.critical;

    comp.gamma = u;
    for (const auto& ms : ctx.modes) {
        for (int j = 0; j < 2; ++j) {
            const double lp = inner_l2(u, ms.LFm[j]);
            const double lm = inner_l2(u, ms.LFp[j]);
            comp.lambda_plus.push_back(lp);
            comp.lambda_minus.push_back(lm);
            axpy(comp.gamma, -lp, ms.Fp[j]);
            axpy(comp.gamma, -lm, ms.Fm[j]);
        }
    }
    comp.mu1 = inner_l2(u, ctx.dxQ) / ctx.dxQ_norm2;
    comp.mu2 = inner_l2(u, ctx.Q) / ctx.dcQ_Q;
    axpy(comp.gamma, -comp.mu1, ctx.dxQ);
    axpy(comp.gamma, -comp.mu2, ctx.dcQ);
    if (ctx.critical) {
        comp.a0 = inner_l2(u, ctx.psi_c) / ctx.psi_c_norm2;
        comp.a1 = inner_l2(u, ctx.psi_s) / ctx.psi_s_norm2;
        axpy(comp.gamma, -comp.a0, ctx.psi_c);
        axpy(comp.gamma, -comp.a1, ctx.psi_s);
    }
    return comp;
}

Field reconstruct(const DecompositionContext& ctx, const Components& comp) {
    Field u = comp.gamma;
    std::size_t p = 0;
    for (const auto& ms : ctx.modes) {
        for (int j = 0; j < 2; ++j, ++p) {
            axpy(u, comp.lambda_plus[p], ms.Fp[j]);
            axpy(u, comp.lambda_minus[p], ms.Fm[j]);
        }
    }
    axpy(u, comp.mu1, ctx.dxQ);
    axpy(u, comp.mu2, ctx.dcQ);
    if (ctx.critical) {
        axpy(u, comp.a0, ctx.psi_c);
        axpy(u, comp.a1, ctx.psi_s);
    }
    return u;
}

double l_form(const DecompositionContext& ctx, const Field& u) {
    const Field ux = derivative(u, Axis::X, 1);
    const Field uy = derivative(u, Axis::Y, 1);
    double s = inner_l2(ux, ux) + inner_l2(uy, uy);
    double w = 0.0;
    for (std::size_t p = 0; p < u.v.size(); ++p)
        w += (ctx.c_star - 2.0 * ctx.Q.v[p]) * u.v[p] * u.v[p];
    return s + w * u.grid->dx * u.grid->dy;
}

double p_d_norm(const Components& comp) {
    double s = 0.0;
    for (double l : comp.lambda_plus) s += l * l;
    for (double l : comp.lambda_minus) s += l * l;
    s += comp.kappa * comp.kappa * comp.mu1 * comp.mu1;
    s += comp.mu2 * comp.mu2;
    if (comp.critical)
        s += comp.kappa * comp.kappa * (comp.a0 * comp.a0 + comp.a1 * comp.a1);
    return std::sqrt(s);
}

double p_plus_norm(const Components& comp) {
    double s = 0.0;
    for (double l : comp.lambda_plus) s += l * l;
    return std::sqrt(s);
}

double e_kappa_norm(const DecompositionContext& ctx, const Components& comp) {
    const double pd = p_d_norm(comp);
    double lg = l_form(ctx, comp.gamma);
    const double gh1 = inner_h1(comp.gamma, comp.gamma);
    if (lg < -1e-10 * std::max(1.0, gh1)) {
        std::ostringstream os;
        os << "e_kappa_norm: coercive block negative beyond tolerance (<gamma,L gamma> = "
           << lg << ")";
        throw guard_error(os.str());
    }
    lg = std::max(0.0, lg);
    return std::sqrt(pd * pd + lg);
}

double e_kappa_of_field(const DecompositionContext& ctx, const Field& u, double kappa) {
    return e_kappa_norm(ctx, project(ctx, u, kappa));
}

double e_kappa_pair(const DecompositionContext& ctx, const Field& v, double c, double kappa) {
    const double n = e_kappa_of_field(ctx, v, kappa);
    const double lc = std::log(c) - std::log(ctx.c_star);
    return std::sqrt(n * n + lc * lc);
}

double plateau(double r) {
    if (r <= kPlateauC2) return 1.0;
    if (r >= 2.0 * kPlateauC2) return r;
    const double t = (r - kPlateauC2) / kPlateauC2;
    const double s = smooth_step(t);
    return (1.0 - s) + s * r;
}

double phi_delta(const DecompositionContext& ctx, const Field& v, double delta, double kappa) {
    const Components comp = project(ctx, v, kappa);
    const double gnorm = std::sqrt(std::max(0.0, l_form(ctx, comp.gamma)));
    return plateau(gnorm / delta);
}

MobileDistanceDetail mobile_distance_detail(const DecompositionContext& ctx, const Field& v0,
                                            double c0, const Field& v1, double c1,
                                            double delta, double kappa) {
    if (!(c0 > 0.0) || !(c1 > 0.0))
        throw std::invalid_argument("mobile_distance: speeds must be positive");
    const Components comp0 = project(ctx, v0, kappa);
    const Components comp1 = project(ctx, v1, kappa);

    const Components diff = project(ctx, subtracted(v0, v1), kappa);
    const double pd = p_d_norm(diff);

    const Field* gam[2] = {&comp0.gamma, &comp1.gamma};
    const double phi_w[2] = {phi_delta(ctx, v0, delta, kappa),
                             phi_delta(ctx, v1, delta, kappa)};

    const auto& g = *ctx.grid;
    const int rmax = g.nx / 4;  // |q| <= X/2

    MobileDistanceDetail best;
    best.term_inner = 1e300;
    for (int j = 0; j < 2; ++j) {
        // inner objective for orientation j: gamma_j vs shifted gamma_{1-j}
        const Field& a = *gam[j];
        const Field& b = *gam[1 - j];
        const double pw = phi_w[1 - j] * phi_w[1 - j];
        auto value_at_shift = [&](const Field& shifted, double q) {
            const double en = e_kappa_of_field(ctx, subtracted(a, shifted), kappa);
            return en * en + delta * q * q * pw;
        };
        int best_r = 0;
        double best_val = 1e300;
        for (int r = -rmax; r <= rmax; ++r) {
            const double val = value_at_shift(roll_x(b, r), r * g.dx);
            if (val < best_val) {
                best_val = val;
                best_r = r;
            }
        }
        auto smooth_obj = [&](double q) { return value_at_shift(shift_x(b, q), q); };
        const double q0 = best_r * g.dx;
        const double q = golden_min(smooth_obj, q0 - g.dx, q0 + g.dx, 1e-8);
        const double val = smooth_obj(q);
        if (val < best.term_inner) {
            best.term_inner = val;
            best.q = q;
            best.j = j;
        }
    }

    best.term_pd = pd * pd;
    const double lc = std::log(c0) - std::log(c1);
    best.term_logc = lc * lc;
    best.value = std::sqrt(best.term_pd + best.term_inner + best.term_logc);
    return best;
}

double mobile_distance(const DecompositionContext& ctx, const Field& v0, double c0,
                       const Field& v1, double c1, double delta, double kappa) {
    return mobile_distance_detail(ctx, v0, c0, v1, c1, delta, kappa).value;
}

ModulationState orthogonality_solve(const DecompositionContext& ctx, const Field& u,
                                    double tube_radius) {
    const TubeDistance td = tube_distance(u, ctx.c_star);
    if (td.dist >= tube_radius) {
        std::ostringstream os;
        os << "orthogonality_solve: state outside tube (distance " << td.dist
           << " >= " << tube_radius << ")";
        throw outside_tube_error(os.str());
    }

    double c = ctx.c_star;
    double rho = td.q;
    Field shifted = shift_x(u, -rho);
    double r1 = 0.0, r2 = 0.0;

    for (int iter = 0; iter < 60; ++iter) {
        const Field Qc = line_soliton(c, ctx.grid);
        Field v = subtracted(shifted, Qc);
        r1 = inner_l2(v, ctx.dxQ);
        r2 = inner_l2(v, ctx.Q);
        const double scale = std::max(1.0, norm_l2(u)) *
                             std::max(1.0, norm_l2(ctx.Q));
        if (std::abs(r1) + std::abs(r2) <= 1e-13 * scale) break;

        const Field ux = derivative(shifted, Axis::X, 1);
        const Field dcQc = soliton_derivatives(c, ctx.grid).dc;
        const double j11 = inner_l2(ux, ctx.dxQ);
        const double j12 = -inner_l2(dcQc, ctx.dxQ);
        const double j21 = inner_l2(ux, ctx.Q);
        const double j22 = -inner_l2(dcQc, ctx.Q);
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-12)
            throw guard_error("orthogonality_solve: singular modulation Jacobian");
        const double drho = (j22 * (-r1) - j12 * (-r2)) / det;
        const double dc = (-j21 * (-r1) + j11 * (-r2)) / det;
        rho += drho;
        c += dc;
        if (!(c > 0.0))
            throw guard_error("orthogonality_solve: speed left the positive half-line");
        shifted = shift_x(u, -rho);
    }

    ModulationState st;
    st.c = c;
    st.rho = rho;
    st.v = subtracted(shifted, line_soliton(c, ctx.grid));
    st.residuals = {inner_l2(st.v, ctx.dxQ), inner_l2(st.v, ctx.Q)};
    st.tube_dist = td.dist;

    const double closeness = norm_h1(st.v) + std::abs(c - ctx.c_star);
    if (td.dist > 1e-13 && closeness > 1e3 * td.dist)
        throw guard_error("orthogonality_solve: post-check failed, decomposition too large");
    return st;
}

ModulationState critical_orthogonality_solve(const DecompositionContext& ctx,
                                             const ModulatedFamily& family, const Field& u,
                                             double tube_radius) {
    if (!ctx.critical)
        throw std::invalid_argument("critical_orthogonality_solve: context not at a critical speed");
    const TubeDistance td = tube_distance(u, ctx.c_star);
    if (td.dist >= tube_radius) {
        std::ostringstream os;
        os << "critical_orthogonality_solve: state outside tube (distance " << td.dist
           << " >= " << tube_radius << ")";
        throw outside_tube_error(os.str());
    }

    double c = ctx.c_star;
    double rho = td.q;
    AmplitudePair a{0.0, 0.0};
    {
        const Field w = subtracted(shift_x(u, -rho), ctx.Q);
        a[0] = inner_l2(w, ctx.psi_c) / ctx.psi_c_norm2;
        a[1] = inner_l2(w, ctx.psi_s) / ctx.psi_s_norm2;
    }

    Eigen::Matrix4d J;
    Eigen::Vector4d r;
    Field shifted = shift_x(u, -rho);
    double rnorm = 1e300;
    const double scale = std::max(1.0, norm_l2(u)) * std::max(1.0, norm_l2(ctx.Q));

    for (int iter = 0; iter < 80; ++iter) {
        const Field th = family.theta(a, c);
        const Field thx = family.theta_dx(a, c);
        const Field tha0 = family.theta_da(a, c, 0);
        const Field tha1 = family.theta_da(a, c, 1);
        const Field v = subtracted(shifted, th);

        const Field* W[4] = {&th, &thx, &tha0, &tha1};
        for (int i = 0; i < 4; ++i) r[i] = inner_l2(v, *W[i]);
        rnorm = r.cwiseAbs().sum();
        if (rnorm <= 1e-12 * scale) break;

        const Field ux = derivative(shifted, Axis::X, 1);
        const Field thc = family.theta_dc(a, c);
        for (int i = 0; i < 4; ++i) {
            J(i, 0) = -inner_l2(thc, *W[i]);   // d/dc
            J(i, 1) = inner_l2(ux, *W[i]);     // d/drho
            J(i, 2) = -inner_l2(tha0, *W[i]);  // d/da0
            J(i, 3) = -inner_l2(tha1, *W[i]);  // d/da1
        }
        Eigen::FullPivLU<Eigen::Matrix4d> lu(J);
        if (!lu.isInvertible())
            throw guard_error("critical_orthogonality_solve: singular modulation Jacobian");
        const Eigen::Vector4d dp = lu.solve(-r);
        // damped updates keep the family solves inside their amplitude range
        double step = 1.0;
        const double max_da = std::max(std::abs(dp[2]), std::abs(dp[3]));
        if (max_da > 0.05) step = 0.05 / max_da;
        c += step * dp[0];
        rho += step * dp[1];
        a[0] += step * dp[2];
        a[1] += step * dp[3];
        if (!(c > 0.0))
            throw guard_error("critical_orthogonality_solve: speed left the positive half-line");
        shifted = shift_x(u, -rho);
    }
    if (rnorm > 1e-10 * scale)
        throw guard_error("critical_orthogonality_solve: Newton failed to converge");

    ModulationState st;
    st.c = c;
    st.rho = rho;
    st.a = a;
    st.v = subtracted(shifted, family.theta(a, c));
    const Field th = family.theta(a, c);
    const Field thx = family.theta_dx(a, c);
    const Field tha0 = family.theta_da(a, c, 0);
    const Field tha1 = family.theta_da(a, c, 1);
    st.residuals = {inner_l2(st.v, th), inner_l2(st.v, thx), inner_l2(st.v, tha0),
                    inner_l2(st.v, tha1)};
    st.tube_dist = td.dist;

    const double closeness =
        norm_h1(st.v) + std::abs(c - ctx.c_star) + std::hypot(a[0], a[1]);
    if (td.dist > 1e-13 && closeness > 1e3 * td.dist)
        throw guard_error("critical_orthogonality_solve: post-check failed");
    return st;
}

}  // namespace zk
