#include "zk/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "zk/errors.hpp"
#include "zk/waves.hpp"

namespace zk {

namespace {

using Cvec = std::vector<std::complex<double>>;
using Svec = std::vector<double>;

constexpr double kPi = 3.14159265358979323846;

inline double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// Dispersive symbol of -d/dx Delta (plus an optional advection c* d/dx),
// purely imaginary; Nyquist bins are dropped so real states stay real.
Cvec linear_symbol(const GridPtr& g, double c_shift) {
    Cvec L(g->size(), {0.0, 0.0});
    for (int i = 0; i < g->nx; ++i) {
        if (i == g->nx / 2) continue;
        for (int j = 0; j < g->ny; ++j) {
            if (j == g->ny / 2) continue;
            const double xi = g->xi[i];
            const double eta = g->eta[j];
            L[g->idx(i, j)] = std::complex<double>(0.0, xi * (xi * xi + eta * eta + c_shift));
        }
    }
    return L;
}

struct DealiasMask {
    std::vector<char> keep;
    explicit DealiasMask(const CylGrid& g) : keep(g.size(), 1) {
        const int mx = g.nx / 3, my = g.ny / 3;
        for (int i = 0; i < g.nx; ++i)
            for (int j = 0; j < g.ny; ++j) {
                const int mi = i <= g.nx / 2 - 1 ? i : i - g.nx;
                const int nj = j <= g.ny / 2 - 1 ? j : j - g.ny;
                if (std::abs(mi) > mx || std::abs(nj) > my) keep[g.idx(i, j)] = 0;
            }
    }
    void apply(Cvec& c) const {
        for (std::size_t p = 0; p < c.size(); ++p)
            if (!keep[p]) c[p] = 0.0;
    }
};

// State of a coupled spectral + scalar integration.
struct State {
    Cvec field;
    Svec scalars;
};

// Right-hand side minus the diagonal linear symbol. Implementations fill
// nhat (spectral) and sdot from the spectral field, its grid values, and t.
struct Rhs {
    virtual ~Rhs() = default;
    virtual void eval(const Cvec& fhat, const Field& fgrid, const Svec& scalars, double t,
                      Cvec& nhat, Svec& sdot) = 0;
};

struct Stepper {
    GridPtr grid;
    Cvec L;
    Cvec e_half, e_half_inv, e_full;  // IFRK4 phases
    Cvec E, E2, Qc, f1, f2, f3;       // ETDRK4 coefficient arrays
    double sQ = 0.0, sf1 = 0.0, sf2 = 0.0, sf3 = 0.0;  // scalar (z = 0) limits
    Integrator::Scheme scheme;
    double h;

    Stepper(GridPtr g, Cvec sym, double dt, Integrator::Scheme sc)
        : grid(std::move(g)), L(std::move(sym)), scheme(sc), h(dt) {
        const std::size_t n = L.size();
        if (scheme == Integrator::Scheme::IFRK4) {
            e_half.resize(n);
            e_half_inv.resize(n);
            e_full.resize(n);
            for (std::size_t p = 0; p < n; ++p) {
                e_half[p] = std::exp(L[p] * (0.5 * h));
                e_half_inv[p] = std::conj(e_half[p]);  // |e^{L dt}| = 1
                e_full[p] = e_half[p] * e_half[p];
            }
        } else {
            E.resize(n);
            E2.resize(n);
            Qc.resize(n);
            f1.resize(n);
            f2.resize(n);
            f3.resize(n);
            for (std::size_t p = 0; p < n; ++p) {
                const std::complex<double> z = L[p] * h;
                E[p] = std::exp(z);
                E2[p] = std::exp(0.5 * z);
                const auto ph1h = phi1(0.5 * z);
                Qc[p] = 0.5 * h * ph1h;
                const auto p1 = phi1(z), p2 = phi2(z), p3 = phi3(z);
                f1[p] = h * (p1 - 3.0 * p2 + 4.0 * p3);
                f2[p] = h * (p2 - 2.0 * p3);
                f3[p] = h * (4.0 * p3 - p2);
            }
            sQ = 0.5 * h;
            sf1 = h / 6.0;
            sf2 = h / 6.0;
            sf3 = h / 6.0;
        }
    }

    static std::complex<double> phi1(std::complex<double> z) {
        if (std::abs(z) < 0.25) return phi_series(z, 1);
        return (std::exp(z) - 1.0) / z;
    }
    static std::complex<double> phi2(std::complex<double> z) {
        if (std::abs(z) < 0.25) return phi_series(z, 2);
        return (std::exp(z) - 1.0 - z) / (z * z);
    }
    static std::complex<double> phi3(std::complex<double> z) {
        if (std::abs(z) < 0.25) return phi_series(z, 3);
        return (std::exp(z) - 1.0 - z - 0.5 * z * z) / (z * z * z);
    }
    // phi_l(z) = sum_{k>=0} z^k / (k + l)!
    static std::complex<double> phi_series(std::complex<double> z, int l) {
        std::complex<double> term(1.0, 0.0);
        double fact = 1.0;
        for (int k = 1; k <= l; ++k) fact *= k;
        term /= fact;
        std::complex<double> sum = term;
        for (int k = 1; k <= 24; ++k) {
            term *= z / static_cast<double>(k + l);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }

    void step_ifrk4(State& st, double t, Rhs& rhs, const Field& grid0, Cvec& work_n,
                    Svec& work_s) {
        const std::size_t n = st.field.size();
        const std::size_t ns = st.scalars.size();
        Cvec k1(n), k2(n), k3(n), k4(n), arg(n);
        Svec s1(ns), s2(ns), s3(ns), s4(ns), sarg(ns);
        Field g(grid);

        // k1 at tau = 0 (grid values supplied by the caller for reuse)
        rhs.eval(st.field, grid0, st.scalars, t, k1, s1);

        // k2: tau = dt/2
        for (std::size_t p = 0; p < n; ++p)
            arg[p] = e_half[p] * (st.field[p] + 0.5 * h * k1[p]);
        for (std::size_t q = 0; q < ns; ++q) sarg[q] = st.scalars[q] + 0.5 * h * s1[q];
        to_grid(arg, g);
        rhs.eval(arg, g, sarg, t + 0.5 * h, work_n, s2);
        for (std::size_t p = 0; p < n; ++p) k2[p] = e_half_inv[p] * work_n[p];

        // k3: tau = dt/2
        for (std::size_t p = 0; p < n; ++p)
            arg[p] = e_half[p] * st.field[p] + 0.5 * h * e_half[p] * k2[p];
        for (std::size_t q = 0; q < ns; ++q) sarg[q] = st.scalars[q] + 0.5 * h * s2[q];
        to_grid(arg, g);
        rhs.eval(arg, g, sarg, t + 0.5 * h, work_n, s3);
        for (std::size_t p = 0; p < n; ++p) k3[p] = e_half_inv[p] * work_n[p];

        // k4: tau = dt
        for (std::size_t p = 0; p < n; ++p)
            arg[p] = e_full[p] * (st.field[p] + h * k3[p]);
        for (std::size_t q = 0; q < ns; ++q) sarg[q] = st.scalars[q] + h * s3[q];
        to_grid(arg, g);
        rhs.eval(arg, g, sarg, t + h, work_n, s4);
        for (std::size_t p = 0; p < n; ++p) k4[p] = std::conj(e_full[p]) * work_n[p];

        for (std::size_t p = 0; p < n; ++p) {
            const std::complex<double> incr =
                (h / 6.0) * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
            st.field[p] = e_full[p] * (st.field[p] + incr);
        }
        for (std::size_t q = 0; q < ns; ++q)
            st.scalars[q] += (h / 6.0) * (s1[q] + 2.0 * s2[q] + 2.0 * s3[q] + s4[q]);
        work_s = s1;  // derivatives at step start (rho_dot etc.)
    }

    void step_etdrk4(State& st, double t, Rhs& rhs, const Field& grid0, Cvec& work_n,
                     Svec& work_s) {
        const std::size_t n = st.field.size();
        const std::size_t ns = st.scalars.size();
        Cvec Nv(n), Na(n), Nb(n), Nc(n), a(n), b(n), c(n);
        Svec sv(ns), sa(ns), sb(ns), sc(ns), sarg(ns);
        Field g(grid);

        rhs.eval(st.field, grid0, st.scalars, t, Nv, sv);
        for (std::size_t p = 0; p < n; ++p) a[p] = E2[p] * st.field[p] + Qc[p] * Nv[p];
        for (std::size_t q = 0; q < ns; ++q) sarg[q] = st.scalars[q] + sQ * sv[q];
        to_grid(a, g);
        rhs.eval(a, g, sarg, t + 0.5 * h, Na, sa);

        for (std::size_t p = 0; p < n; ++p) b[p] = E2[p] * st.field[p] + Qc[p] * Na[p];
        for (std::size_t q = 0; q < ns; ++q) sarg[q] = st.scalars[q] + sQ * sa[q];
        to_grid(b, g);
        rhs.eval(b, g, sarg, t + 0.5 * h, Nb, sb);

        for (std::size_t p = 0; p < n; ++p)
            c[p] = E2[p] * a[p] + Qc[p] * (2.0 * Nb[p] - Nv[p]);
        for (std::size_t q = 0; q < ns; ++q)
            sarg[q] = st.scalars[q] + sQ * (sv[q] + 2.0 * (sb[q] - sv[q]));
        to_grid(c, g);
        rhs.eval(c, g, sarg, t + h, Nc, sc);

        for (std::size_t p = 0; p < n; ++p)
            st.field[p] = E[p] * st.field[p] + f1[p] * Nv[p] + 2.0 * f2[p] * (Na[p] + Nb[p]) +
                          f3[p] * Nc[p];
        for (std::size_t q = 0; q < ns; ++q)
            st.scalars[q] += sf1 * sv[q] + 2.0 * sf2 * (sa[q] + sb[q]) + sf3 * sc[q];
        work_n = Nv;
        work_s = sv;
    }

    void to_grid(const Cvec& fhat, Field& out) const {
        SpectralField F(grid);
        F.c = fhat;
        out = from_spectral(F);
    }
};

int step_count(double t_end, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be positive");
    if (t_end < 0.0) throw std::invalid_argument("integrator: t_end must be >= 0");
    if (t_end == 0.0) return 0;
    int n = static_cast<int>(std::llround(t_end / dt));
    if (n < 1) n = 1;
    return n;
}

void guard_state(const Field& g, double umax, double t) {
    double m = 0.0;
    for (double v : g.v) {
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "integrator guard: non-finite state at t = " << t;
            throw guard_error(os.str());
        }
        m = std::max(m, std::abs(v));
    }
    if (m > umax) {
        std::ostringstream os;
        os << "integrator guard: |u|_inf = " << m << " exceeded bound " << umax
           << " at t = " << t;
        throw guard_error(os.str());
    }
}

// ---------------------------------------------------------------------------
// Full equation
// ---------------------------------------------------------------------------

struct ZkRhs : Rhs {
    GridPtr grid;
    DealiasMask mask;
    bool dealias_on, linear_only;

    ZkRhs(GridPtr g, bool da, bool lin)
        : grid(g), mask(*g), dealias_on(da), linear_only(lin) {}

    void eval(const Cvec&, const Field& fgrid, const Svec&, double, Cvec& nhat,
              Svec&) override {
        const auto& g = *grid;
        nhat.assign(g.size(), {0.0, 0.0});
        if (linear_only) return;
        Field sq(grid);
        for (std::size_t p = 0; p < sq.v.size(); ++p) sq.v[p] = fgrid.v[p] * fgrid.v[p];
        SpectralField S = to_spectral(sq);
        if (dealias_on) mask.apply(S.c);
        for (int i = 0; i < g.nx; ++i) {
            if (i == g.nx / 2) continue;
            const std::complex<double> ix(0.0, g.xi[i]);
            for (int j = 0; j < g.ny; ++j)
                nhat[g.idx(i, j)] = -ix * S.c[g.idx(i, j)];
        }
    }
};

}  // namespace

double cutoff_chi(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double a = bump(2.0 - r);
    const double b = bump(r - 1.0);
    return a / (a + b);
}

Trajectory evolve(const Field& u0, const Integrator& integ) {
    const GridPtr grid = u0.grid;
    Trajectory traj;
    traj.grid = grid;

    const int nsteps = step_count(integ.t_end, integ.dt);
    const double dt = nsteps > 0 ? integ.t_end / nsteps : integ.dt;
    traj.dt = dt;

    SpectralField U = to_spectral(u0);
    if (integ.dealias) U = dealias(U);
    State st{U.c, {}};

    ZkRhs rhs(grid, integ.dealias, integ.linear_only);
    Stepper stepper(grid, linear_symbol(grid, 0.0), dt, integ.scheme);

    Cvec work_n;
    Svec work_s;
    SpectralField cur(grid);

    auto record = [&](int step, double t) {
        cur.c = st.field;
        Field g = from_spectral(cur);
        guard_state(g, integ.guard_umax, t);
        const Functionals fn = functionals(g, integ.action_speed);
        traj.diag_t.push_back(t);
        traj.diag_M.push_back(fn.M);
        traj.diag_E.push_back(fn.E);
        traj.diag_S.push_back(fn.S);
        if (step % integ.snapshot_every == 0 || step == nsteps) {
            traj.snap_t.push_back(t);
            traj.snaps.push_back(g);
        }
        return g;
    };

    Field g = record(0, 0.0);
    for (int s = 1; s <= nsteps; ++s) {
        if (integ.scheme == Integrator::Scheme::IFRK4)
            stepper.step_ifrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        else
            stepper.step_etdrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        g = record(s, s * dt);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Localized modulation system
// ---------------------------------------------------------------------------

namespace {

struct LocalizedRhs : Rhs {
    const DecompositionContext& ctx;
    GridPtr grid;
    DealiasMask mask;
    bool dealias_on;
    double delta;
    double c_star;
    Field dx2Q, L_dx2Q;     // d^2/dx^2 Q_{c*} and L_{c*} d^2/dx^2 Q_{c*}
    double dxQ_n2;
    std::vector<double> q_star, dxq_star, dcq_star;  // 1D x-profiles at c*
    double chi_last = 1.0;

    LocalizedRhs(const DecompositionContext& c, double d, bool da)
        : ctx(c), grid(c.grid), mask(*c.grid), dealias_on(da), delta(d), c_star(c.c_star) {
        dx2Q = derivative(ctx.dxQ, Axis::X, 1);
        // L w = -Delta w + c* w - 2 Q w
        Field lap = added(derivative(dx2Q, Axis::X, 2), derivative(dx2Q, Axis::Y, 2));
        L_dx2Q = Field(grid);
        for (std::size_t p = 0; p < L_dx2Q.v.size(); ++p)
            L_dx2Q.v[p] = -lap.v[p] + (c_star - 2.0 * ctx.Q.v[p]) * dx2Q.v[p];
        dxQ_n2 = ctx.dxQ_norm2;
        q_star.resize(grid->nx);
        dxq_star.resize(grid->nx);
        dcq_star.resize(grid->nx);
        for (int i = 0; i < grid->nx; ++i) {
            q_star[i] = soliton_value(c_star, grid->x[i]);
            dxq_star[i] = soliton_dx_value(c_star, grid->x[i]);
            dcq_star[i] = soliton_dc_value(c_star, grid->x[i]);
        }
    }

    void eval(const Cvec& fhat, const Field& v, const Svec& scalars, double,
              Cvec& nhat, Svec& sdot) override {
        const auto& g = *grid;
        const double c = scalars[0];
        if (!(c > 0.0)) throw guard_error("localized_evolve: speed left (0, inf)");

        // cutoff from ||v||_H1 and |c - c*|
        double h1 = 0.0;
        {
            const double area = 4.0 * kPi * g.X * g.L;
            for (int i = 0; i < g.nx; ++i)
                for (int j = 0; j < g.ny; ++j) {
                    const double w = 1.0 + g.xi[i] * g.xi[i] + g.eta[j] * g.eta[j];
                    h1 += w * std::norm(fhat[g.idx(i, j)]);
                }
            h1 *= area;
        }
        const double dc = c - c_star;
        const double chi = cutoff_chi((h1 + dc * dc) / (delta * delta));
        chi_last = chi;

        // Modulation scalars from the displayed quadratures; every d/dx has
        // been moved onto the (y-independent) soliton profiles by parts:
        //   (rho_dot - c) M11 = (v, L dx^2 Q*) + chi ((c-c*)v - v^2 + 2(Q*-Qc)v, dx^2 Q*)
        //   M11 = ||dxQ*||^2 - chi (v + Qc - Q*, dx^2 Q*)
        //   c_dot M22 = chi (v^2 - 2(Q*-Qc)v, dxQ*)
        //   M22 = (dcQ* + chi (dcQc - dcQ*), Q*)
        double ip_v_Ldx2Q = 0.0, ip_res_dx2Q = 0.0, ip_vq_dx2Q = 0.0, ip_res2_dxQ = 0.0;
        double m22_int = 0.0;
        const double cell = g.dx * g.dy;
        for (int i = 0; i < g.nx; ++i) {
            const double qc = soliton_value(c, g.x[i]);
            const double dqc = qc - q_star[i];  // Qc - Q*
            const double dcqc = soliton_dc_value(c, g.x[i]);
            double row_v = 0.0, row_res = 0.0, row_res2 = 0.0;
            for (int j = 0; j < g.ny; ++j) {
                const double vv = v.at(i, j);
                row_v += vv;
                row_res += dc * vv - vv * vv - 2.0 * dqc * vv;
                row_res2 += vv * vv + 2.0 * dqc * vv;
            }
            ip_v_Ldx2Q += row_v * L_dx2Q.at(i, 0);
            ip_res_dx2Q += row_res * dx2Q.at(i, 0);
            ip_res2_dxQ += row_res2 * dxq_star[i];
            ip_vq_dx2Q += (row_v + g.ny * dqc) * dx2Q.at(i, 0);
            m22_int += (dcq_star[i] + chi * (dcqc - dcq_star[i])) * q_star[i] * g.ny;
        }
        ip_v_Ldx2Q *= cell;
        ip_res_dx2Q *= cell;
        ip_res2_dxQ *= cell;
        ip_vq_dx2Q *= cell;
        m22_int *= cell;

        const double M11 = dxQ_n2 - chi * ip_vq_dx2Q;
        const double M22 = m22_int;
        if (std::abs(M11) < 1e-8 || std::abs(M22) < 1e-8)
            throw guard_error("localized_evolve: modulation quadrature denominator near zero");

        const double rho_dot_minus_c = (ip_v_Ldx2Q + chi * ip_res_dx2Q) / M11;
        const double c_dot = chi * ip_res2_dxQ / M22;
        const double rho_dot = c + rho_dot_minus_c;

        // field right-hand side minus the diagonal part:
        //   dx[ -2 Q* v + chi(-v^2 + (rho_dot - c*) v + 2 (Q* - Qc) v
        //       + (rho_dot - c)(Qc - Q*)) ]  + 1D terms
        Field gfield(grid);
        for (int i = 0; i < g.nx; ++i) {
            const double qs = q_star[i];
            const double qc = soliton_value(c, g.x[i]);
            const double dqc = qs - qc;  // Q* - Qc
            const double drift = (rho_dot - c) * (qc - qs);
            for (int j = 0; j < g.ny; ++j) {
                const double vv = v.at(i, j);
                gfield.at(i, j) = -2.0 * qs * vv +
                                  chi * (-vv * vv + (rho_dot - c_star) * vv +
                                         2.0 * dqc * vv + drift);
            }
        }
        SpectralField G = to_spectral(gfield);
        if (dealias_on) mask.apply(G.c);
        nhat.assign(g.size(), {0.0, 0.0});
        for (int i = 0; i < g.nx; ++i) {
            if (i == g.nx / 2) continue;
            const std::complex<double> ix(0.0, g.xi[i]);
            for (int j = 0; j < g.ny; ++j) nhat[g.idx(i, j)] = ix * G.c[g.idx(i, j)];
        }
        // y-independent profile terms enter only the eta = 0 bins:
        //   (rho_dot - c) dxQ* - c_dot [(1 - chi) dcQ* + chi dcQc]
        {
            std::vector<std::complex<double>> prof(g.nx), prof_hat(g.nx);
            for (int i = 0; i < g.nx; ++i) {
                const double dcqc = soliton_dc_value(c, g.x[i]);
                prof[i] = rho_dot_minus_c * dxq_star[i] -
                          c_dot * ((1.0 - chi) * dcq_star[i] + chi * dcqc);
            }
            detail::fft1d_x(grid, prof, prof_hat, true);
            for (int i = 0; i < g.nx; ++i) nhat[g.idx(i, 0)] += prof_hat[i];
        }

        sdot.resize(2);
        sdot[0] = c_dot;
        sdot[1] = rho_dot;
    }
};

}  // namespace

Trajectory localized_evolve(const DecompositionContext& ctx, const Field& v0, double c0,
                            double rho0, double delta, const Integrator& integ) {
    if (!(delta > 0.0)) throw std::invalid_argument("localized_evolve: delta must be positive");
    if (!(c0 > 0.0)) throw std::invalid_argument("localized_evolve: c0 must be positive");
    const GridPtr grid = ctx.grid;
    Trajectory traj;
    traj.grid = grid;
    traj.c_star = ctx.c_star;

    const int nsteps = step_count(integ.t_end, integ.dt);
    const double dt = nsteps > 0 ? integ.t_end / nsteps : integ.dt;
    traj.dt = dt;

    SpectralField V = to_spectral(v0);
    if (integ.dealias) V = dealias(V);
    State st{V.c, {c0, rho0}};

    LocalizedRhs rhs(ctx, delta, integ.dealias);
    Stepper stepper(grid, linear_symbol(grid, ctx.c_star), dt, integ.scheme);

    Cvec work_n;
    Svec work_s;
    SpectralField cur(grid);

    auto record = [&](int step, double t, double rho_dot) {
        cur.c = st.field;
        Field g = from_spectral(cur);
        guard_state(g, integ.guard_umax, t);
        const Functionals fn = functionals(g, ctx.c_star);
        traj.diag_t.push_back(t);
        traj.diag_M.push_back(fn.M);
        traj.diag_E.push_back(fn.E);
        traj.diag_S.push_back(fn.S);
        traj.ser_t.push_back(t);
        traj.ser_c.push_back(st.scalars[0]);
        traj.ser_rho.push_back(st.scalars[1]);
        traj.ser_rho_dot.push_back(rho_dot);
        traj.ser_chi.push_back(rhs.chi_last);
        if (step % integ.snapshot_every == 0 || step == nsteps) {
            traj.snap_t.push_back(t);
            traj.snaps.push_back(g);
        }
        return g;
    };

    // exact initial rho_dot for the scalar series
    {
        SpectralField V0(grid);
        V0.c = st.field;
        Field g0 = from_spectral(V0);
        Cvec n0;
        Svec s0;
        rhs.eval(st.field, g0, st.scalars, 0.0, n0, s0);
        work_s = s0;
    }
    Field g = record(0, 0.0, work_s[1]);
    for (int s = 1; s <= nsteps; ++s) {
        if (integ.scheme == Integrator::Scheme::IFRK4)
            stepper.step_ifrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        else
            stepper.step_etdrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        g = record(s, s * dt, work_s.empty() ? st.scalars[0] : work_s[1]);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Linearized flow
// ---------------------------------------------------------------------------

FrozenBackground::FrozenBackground(GridPtr grid, double c_star)
    : grid_(std::move(grid)), c_star_(c_star) {}

void FrozenBackground::sample(double, Field& v0, double& c0, double& rho_dot) const {
    v0 = Field(grid_);
    c0 = c_star_;
    rho_dot = c_star_;
}

double FrozenBackground::horizon() const { return 1e300; }

TrajectoryBackground::TrajectoryBackground(const Trajectory& traj) : traj_(traj) {
    if (traj_.snaps.empty() || traj_.ser_t.empty())
        throw std::invalid_argument(
            "TrajectoryBackground: trajectory has no snapshots/scalar series");
}

double TrajectoryBackground::horizon() const { return traj_.snap_t.back(); }

void TrajectoryBackground::sample(double t, Field& v0, double& c0, double& rho_dot) const {
    if (t > horizon() + 1e-12)
        throw std::invalid_argument("TrajectoryBackground: background horizon exceeded");
    // linear interpolation of snapshots
    const auto& ts = traj_.snap_t;
    std::size_t k = 0;
    while (k + 1 < ts.size() && ts[k + 1] < t) ++k;
    if (k + 1 >= ts.size()) {
        v0 = traj_.snaps.back();
    } else {
        const double w = (t - ts[k]) / std::max(1e-300, ts[k + 1] - ts[k]);
        v0 = scaled(traj_.snaps[k], 1.0 - w);
        axpy(v0, w, traj_.snaps[k + 1]);
    }
    const auto& st = traj_.ser_t;
    std::size_t m = 0;
    while (m + 1 < st.size() && st[m + 1] < t) ++m;
    if (m + 1 >= st.size()) {
        c0 = traj_.ser_c.back();
        rho_dot = traj_.ser_rho_dot.back();
    } else {
        const double w = (t - st[m]) / std::max(1e-300, st[m + 1] - st[m]);
        c0 = (1.0 - w) * traj_.ser_c[m] + w * traj_.ser_c[m + 1];
        rho_dot = (1.0 - w) * traj_.ser_rho_dot[m] + w * traj_.ser_rho_dot[m + 1];
    }
}

namespace {

struct LinearizedRhs : Rhs {
    GridPtr grid;
    DealiasMask mask;
    bool dealias_on;
    double c_star;
    const Background& bg;
    Field v0;
    double c0 = 0.0, rho_dot = 0.0;
    double t_cache = -1e300;

    LinearizedRhs(GridPtr g, double cs, const Background& b, bool da)
        : grid(g), mask(*g), dealias_on(da), c_star(cs), bg(b), v0(g) {}

    void eval(const Cvec&, const Field& eta, const Svec&, double t, Cvec& nhat,
              Svec&) override {
        const auto& g = *grid;
        if (t != t_cache) {
            bg.sample(t, v0, c0, rho_dot);
            t_cache = t;
        }
        // dx[ -2 Q_{c0} eta - 2 v0 eta + (rho_dot - c*) eta ]
        Field gf(grid);
        for (int i = 0; i < g.nx; ++i) {
            const double qc = soliton_value(c0, g.x[i]);
            for (int j = 0; j < g.ny; ++j) {
                const double e = eta.at(i, j);
                gf.at(i, j) = (-2.0 * qc - 2.0 * v0.at(i, j) + (rho_dot - c_star)) * e;
            }
        }
        SpectralField G = to_spectral(gf);
        if (dealias_on) mask.apply(G.c);
        nhat.assign(g.size(), {0.0, 0.0});
        for (int i = 0; i < g.nx; ++i) {
            if (i == g.nx / 2) continue;
            const std::complex<double> ix(0.0, g.xi[i]);
            for (int j = 0; j < g.ny; ++j) nhat[g.idx(i, j)] = ix * G.c[g.idx(i, j)];
        }
    }
};

}  // namespace

Trajectory linearized_evolve(const Field& eta0, double c_star, const Background& bg,
                             const Integrator& integ) {
    if (integ.t_end > bg.horizon() + 1e-12)
        throw std::invalid_argument("linearized_evolve: background horizon exceeded");
    const GridPtr grid = eta0.grid;
    Trajectory traj;
    traj.grid = grid;
    traj.c_star = c_star;

    const int nsteps = step_count(integ.t_end, integ.dt);
    const double dt = nsteps > 0 ? integ.t_end / nsteps : integ.dt;
    traj.dt = dt;

    SpectralField U = to_spectral(eta0);
    if (integ.dealias) U = dealias(U);
    State st{U.c, {}};

    LinearizedRhs rhs(grid, c_star, bg, integ.dealias);
    Stepper stepper(grid, linear_symbol(grid, c_star), dt, integ.scheme);

    Cvec work_n;
    Svec work_s;
    SpectralField cur(grid);

    auto record = [&](int step, double t) {
        cur.c = st.field;
        Field g = from_spectral(cur);
        guard_state(g, integ.guard_umax, t);
        const Functionals fn = functionals(g, c_star);
        traj.diag_t.push_back(t);
        traj.diag_M.push_back(fn.M);
        traj.diag_E.push_back(fn.E);
        traj.diag_S.push_back(fn.S);
        if (step % integ.snapshot_every == 0 || step == nsteps) {
            traj.snap_t.push_back(t);
            traj.snaps.push_back(g);
        }
        return g;
    };

    Field g = record(0, 0.0);
    for (int s = 1; s <= nsteps; ++s) {
        if (integ.scheme == Integrator::Scheme::IFRK4)
            stepper.step_ifrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        else
            stepper.step_etdrk4(st, (s - 1) * dt, rhs, g, work_n, work_s);
        g = record(s, s * dt);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Modulation tracking
// ---------------------------------------------------------------------------

namespace {

Trajectory track_impl(const DecompositionContext& ctx, const ModulatedFamily* family,
                      const Trajectory& traj, double tube_radius, double kappa) {
    Trajectory out = traj;
    out.c_star = ctx.c_star;
    out.critical_tracked = (family != nullptr);
    out.trk_t.clear();
    out.trk_c.clear();
    out.trk_rho.clear();
    out.trk_v_l2.clear();
    out.trk_v_h1.clear();
    out.trk_a0.clear();
    out.trk_a1.clear();
    out.trk_lambda_plus.clear();
    out.trk_lambda_minus.clear();
    out.exit_t.reset();

    double prev_rho = 0.0;
    bool have_prev = false;
    const double period = 2.0 * ctx.grid->X;

    for (std::size_t k = 0; k < traj.snaps.size(); ++k) {
        ModulationState st;
        try {
            st = family ? critical_orthogonality_solve(ctx, *family, traj.snaps[k], tube_radius)
                        : orthogonality_solve(ctx, traj.snaps[k], tube_radius);
        } catch (const outside_tube_error&) {
            out.exit_t = traj.snap_t[k];
            break;
        }
        double rho = st.rho;
        if (have_prev) rho += period * std::round((prev_rho - rho) / period);
        prev_rho = rho;
        have_prev = true;

        const Components comp = project(ctx, st.v, kappa);
        out.trk_t.push_back(traj.snap_t[k]);
        out.trk_c.push_back(st.c);
        out.trk_rho.push_back(rho);
        out.trk_v_l2.push_back(norm_l2(st.v));
        out.trk_v_h1.push_back(norm_h1(st.v));
        out.trk_a0.push_back(st.a ? (*st.a)[0] : 0.0);
        out.trk_a1.push_back(st.a ? (*st.a)[1] : 0.0);
        out.trk_lambda_plus.push_back(comp.lambda_plus);
        out.trk_lambda_minus.push_back(comp.lambda_minus);
    }
    return out;
}

}  // namespace

Trajectory modulation_track(const DecompositionContext& ctx, const Trajectory& traj,
                            double tube_radius, double kappa) {
    return track_impl(ctx, nullptr, traj, tube_radius, kappa);
}

Trajectory modulation_track(const DecompositionContext& ctx, const ModulatedFamily& family,
                            const Trajectory& traj, double tube_radius, double kappa) {
    return track_impl(ctx, &family, traj, tube_radius, kappa);
}

}  // namespace zk
