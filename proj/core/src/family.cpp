#include "zk/family.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <sstream>

#include "zk/errors.hpp"
#include "zk/spectrum.hpp"
#include "zk/waves.hpp"

namespace zk {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Even-even (cos x cos) Galerkin workspace shared by every branch solve.
struct EvenBasis {
    GridPtr grid;
    int Mx, My, D;
    std::vector<int> bm, bn;                 // basis index -> (m, n)
    std::vector<std::vector<double>> cx, cy;  // cos tables [m][i], [n][j]
    std::vector<double> wx, wy;               // bin weights (1 or 1/2)

    explicit EvenBasis(GridPtr g) : grid(std::move(g)) {
        const auto& gr = *grid;
        Mx = gr.nx / 2;
        My = gr.ny / 2;
        D = (Mx + 1) * (My + 1);
        bm.resize(D);
        bn.resize(D);
        int d = 0;
        for (int m = 0; m <= Mx; ++m)
            for (int n = 0; n <= My; ++n) {
                bm[d] = m;
                bn[d] = n;
                ++d;
            }
        cx.assign(Mx + 1, std::vector<double>(gr.nx));
        for (int m = 0; m <= Mx; ++m)
            for (int i = 0; i < gr.nx; ++i)
                cx[m][i] = std::cos(kPi * m / gr.X * gr.x[i]);
        cy.assign(My + 1, std::vector<double>(gr.ny));
        for (int n = 0; n <= My; ++n)
            for (int j = 0; j < gr.ny; ++j)
                cy[n][j] = std::cos(n * gr.y[j] / gr.L);
        wx.resize(Mx + 1);
        for (int m = 0; m <= Mx; ++m) wx[m] = (m == 0 || m == Mx) ? 1.0 : 0.5;
        wy.resize(My + 1);
        for (int n = 0; n <= My; ++n) wy[n] = (n == 0 || n == My) ? 1.0 : 0.5;
    }

    // coefficients -> grid values
    Field to_grid(const Eigen::VectorXd& A) const {
        const auto& gr = *grid;
        Field f(grid);
        std::vector<double> xprof(gr.nx);
        for (int d = 0; d < D; ++d) {
            const int m = bm[d], n = bn[d];
            if (A[d] == 0.0) continue;
            for (int i = 0; i < gr.nx; ++i) xprof[i] = A[d] * cx[m][i];
            for (int i = 0; i < gr.nx; ++i) {
                const double xv = xprof[i];
                double* row = &f.v[gr.idx(i, 0)];
                const double* cyn = cy[n].data();
                for (int j = 0; j < gr.ny; ++j) row[j] += xv * cyn[j];
            }
        }
        return f;
    }

    // grid values -> coefficients (even-even part)
    Eigen::VectorXd from_grid(const Field& f) const {
        const auto& gr = *grid;
        const SpectralField F = to_spectral(f);
        Eigen::VectorXd A(D);
        for (int d = 0; d < D; ++d) {
            const int m = bm[d], n = bn[d];
            A[d] = F.c[gr.idx(m, n)].real() / (wx[m] * wy[n]);
        }
        return A;
    }
};

struct FamilyContext {
    GridPtr grid;
    double c_star;
    int n0;
    double tol;
    EvenBasis basis;
    Field Q;
    Field psi_c;
    double psi_norm2;
    Eigen::VectorXd Qcoef;
    Eigen::VectorXd constraint;  // <e_j, psi_c>

    FamilyContext(GridPtr g, double cs, int n, double t)
        : grid(g), c_star(cs), n0(n), tol(t), basis(g),
          Q(line_soliton(cs, g)),
          psi_c(soliton_32_cos(cs, n, g)),
          psi_norm2(inner_l2(psi_c, psi_c)),
          Qcoef(basis.from_grid(Q)) {
        constraint.resize(basis.D);
        const auto& gr = *grid;
        for (int d = 0; d < basis.D; ++d) {
            const int m = basis.bm[d], nn = basis.bn[d];
            double s = 0.0;
            for (int i = 0; i < gr.nx; ++i)
                for (int j = 0; j < gr.ny; ++j)
                    s += basis.cx[m][i] * basis.cy[nn][j] * psi_c.at(i, j);
            constraint[d] = s * gr.dx * gr.dy;
        }
    }

    // Stationary-equation residual on the grid for phi given by coefficients.
    Field residual_grid(const Eigen::VectorXd& A, double c_check, Field* phi_out) const {
        Field phi = basis.to_grid(A);
        Field lap = added(derivative(phi, Axis::X, 2), derivative(phi, Axis::Y, 2));
        Field r(grid);
        for (std::size_t p = 0; p < r.v.size(); ++p)
            r.v[p] = -lap.v[p] + c_check * phi.v[p] - phi.v[p] * phi.v[p];
        if (phi_out) *phi_out = std::move(phi);
        return r;
    }
};

}  // namespace

Field resample_x(const Field& f, double scale) {
    const auto& g = *f.grid;
    const SpectralField F = to_spectral(f);
    // inner y-sums G_m(y_j) = sum_n F_{mn} e^{i eta_n y_j}
    std::vector<std::complex<double>> G(g.size());
    for (int m = 0; m < g.nx; ++m)
        for (int j = 0; j < g.ny; ++j) {
            std::complex<double> s(0.0, 0.0);
            for (int n = 0; n < g.ny; ++n)
                s += F.c[g.idx(m, n)] *
                     std::exp(std::complex<double>(0.0, g.eta[n] * g.y[j]));
            G[g.idx(m, j)] = s;
        }
    Field out(f.grid);
    for (int i = 0; i < g.nx; ++i) {
        const double xs = scale * g.x[i];
        for (int m = 0; m < g.nx; ++m) {
            const bool nyq = (m == g.nx / 2);
            const std::complex<double> ph =
                nyq ? std::complex<double>(std::cos(g.xi[m] * xs), 0.0)
                    : std::exp(std::complex<double>(0.0, g.xi[m] * xs));
            for (int j = 0; j < g.ny; ++j)
                out.at(i, j) += (G[g.idx(m, j)] * ph).real();
        }
    }
    return out;
}

ModulatedFamily::ModulatedFamily(double c_star, GridPtr grid, double tol)
    : c_star_(c_star), grid_(std::move(grid)), tol_(tol) {
    int n = 0;
    if (!is_critical_speed(c_star, grid_->L, &n)) {
        std::ostringstream os;
        os << "ModulatedFamily: c* = " << c_star << " is not a critical speed for L = "
           << grid_->L;
        throw std::invalid_argument(os.str());
    }
    n0_ = n;
}

std::shared_ptr<ModulatedFamily::Branch> ModulatedFamily::solve_branch(double s) const {
    FamilyContext ctx(grid_, c_star_, n0_, tol_);
    auto br = std::make_shared<Branch>();

    if (std::abs(s) < 1e-9) {
        br->phi = ctx.Q;
        br->dphi_ds = ctx.psi_c;
        br->c = c_star_;
        br->dc_ds = 0.0;
        br->residual = norm_l2(ctx.residual_grid(ctx.Qcoef, c_star_, nullptr));
        return br;
    }

    const int D = ctx.basis.D;
    // warm start from the nearest cached branch
    Eigen::VectorXd A;
    double c_check = c_star_;
    long long best_key = -1;
    double best_dist = 1e300;
    for (const auto& [key, cached] : cache_) {
        const double sk = static_cast<double>(key) * 1e-12;
        if (std::abs(sk - s) < best_dist && sk > 1e-9) {
            best_dist = std::abs(sk - s);
            best_key = key;
        }
    }
    if (best_key >= 0) {
        const auto& base = cache_.at(best_key);
        A = ctx.basis.from_grid(base->phi);
        const double ds = s - static_cast<double>(best_key) * 1e-12;
        A += ds * ctx.basis.from_grid(base->dphi_ds);
        c_check = base->c + ds * base->dc_ds;
    } else {
        A = ctx.Qcoef + s * ctx.basis.from_grid(ctx.psi_c);
    }

    Eigen::MatrixXd J(D + 1, D + 1);
    Eigen::VectorXd rhs(D + 1);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    const double phi_scale = std::max(1.0, norm_l2(ctx.Q));
    double resn = 1e300;
    bool converged = false;

    auto assemble = [&](const Field& phi, double cch) {
        const auto& gr = *grid_;
        Field prod(grid_);
        for (int d = 0; d < D; ++d) {
            const int m = ctx.basis.bm[d], n = ctx.basis.bn[d];
            for (int i = 0; i < gr.nx; ++i) {
                const double cxm = ctx.basis.cx[m][i];
                double* row = &prod.v[gr.idx(i, 0)];
                const double* phr = &phi.v[gr.idx(i, 0)];
                const double* cyn = ctx.basis.cy[n].data();
                for (int j = 0; j < gr.ny; ++j) row[j] = phr[j] * cxm * cyn[j];
            }
            J.col(d).head(D) = -2.0 * ctx.basis.from_grid(prod);
        }
        for (int d = 0; d < D; ++d) {
            const int m = ctx.basis.bm[d], n = ctx.basis.bn[d];
            const double xi = kPi * m / gr.X;
            const double eta = n / gr.L;
            J(d, d) += xi * xi + eta * eta + cch;
        }
        J.col(D).head(D) = A;
        J.row(D).head(D) = ctx.constraint.transpose();
        J(D, D) = 0.0;
        lu.compute(J);
    };

    Field phi;
    for (int iter = 0; iter < 40; ++iter) {
        const Field r = ctx.residual_grid(A, c_check, &phi);
        resn = norm_l2(r);
        const double cons = inner_l2(subtracted(phi, ctx.Q), ctx.psi_c) - s * ctx.psi_norm2;
        if (resn <= tol_ * phi_scale && std::abs(cons) <= tol_ * ctx.psi_norm2) {
            converged = true;
            break;
        }
        assemble(phi, c_check);
        rhs.head(D) = -ctx.basis.from_grid(r);
        rhs[D] = -cons;
        const Eigen::VectorXd delta = lu.solve(rhs);
        A += delta.head(D);
        c_check += delta[D];
    }

    if (!converged) {
        std::ostringstream os;
        os << "solve_modulated_family: Newton divergence at s = " << s
           << " (residual " << resn << ")";
        throw guard_error(os.str());
    }

    // branch derivative from the bordered system at the converged state
    assemble(phi, c_check);
    rhs.setZero();
    rhs[D] = ctx.psi_norm2;
    const Eigen::VectorXd dstate = lu.solve(rhs);

    br->phi = ctx.basis.to_grid(A);
    br->dphi_ds = ctx.basis.to_grid(dstate.head(D));
    br->c = c_check;
    br->dc_ds = dstate[D];
    br->residual = resn;
    return br;
}

const ModulatedFamily::Branch& ModulatedFamily::branch(double s) const {
    if (s < 0.0) throw std::invalid_argument("branch: s must be >= 0");
    if (s > 0.25)
        throw std::invalid_argument("branch: amplitude too large for the local family");
    const long long key = std::llround(s * 1e12);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, solve_branch(s)).first;
    return *it->second;
}

namespace {
inline double amp_mag(const AmplitudePair& a) { return std::hypot(a[0], a[1]); }
}  // namespace

ModulatedWave ModulatedFamily::wave(const AmplitudePair& a) const {
    const double s = amp_mag(a);
    const Branch& br = branch(s);
    ModulatedWave w;
    w.a = a;
    w.speed = br.c;
    w.residual = br.residual;
    if (s < 1e-14) {
        w.profile = br.phi;
    } else {
        const double h = (grid_->L / n0_) * std::atan2(a[1], a[0]);
        w.profile = shift_y(br.phi, h);
    }
    return w;
}

Field ModulatedFamily::theta(const AmplitudePair& a, double c) const {
    if (!(c > 0.0)) throw std::invalid_argument("theta: c must be positive");
    const ModulatedWave w = wave(a);
    const double d = c / c_star_;
    return scaled(resample_x(w.profile, std::sqrt(d)), d);
}

Field ModulatedFamily::theta_dx(const AmplitudePair& a, double c) const {
    const ModulatedWave w = wave(a);
    const double d = c / c_star_;
    return scaled(resample_x(derivative(w.profile, Axis::X, 1), std::sqrt(d)),
                  std::pow(d, 1.5));
}

Field ModulatedFamily::theta_dc(const AmplitudePair& a, double c) const {
    const ModulatedWave w = wave(a);
    const double d = c / c_star_;
    const double sc = std::sqrt(d);
    Field p = resample_x(w.profile, sc);
    Field px = resample_x(derivative(w.profile, Axis::X, 1), sc);
    Field out(grid_);
    for (int i = 0; i < grid_->nx; ++i)
        for (int j = 0; j < grid_->ny; ++j)
            out.at(i, j) = (p.at(i, j) + 0.5 * sc * grid_->x[i] * px.at(i, j)) / c_star_;
    return out;
}

Field ModulatedFamily::theta_da(const AmplitudePair& a, double c, int which) const {
    if (which != 0 && which != 1) throw std::invalid_argument("theta_da: which must be 0 or 1");
    const double d = c / c_star_;
    const double sc = std::sqrt(d);
    const double s = amp_mag(a);
    if (s < 1e-9) {
        const Field psi = (which == 0) ? soliton_32_cos(c_star_, n0_, grid_)
                                       : soliton_32_sin(c_star_, n0_, grid_);
        return scaled(resample_x(psi, sc), d);
    }
    const Branch& br = branch(s);
    const double h = (grid_->L / n0_) * std::atan2(a[1], a[0]);
    // rotated branch derivative and the rotation generator
    Field ds_theta = scaled(resample_x(shift_y(br.dphi_ds, h), sc), d);
    Field th = scaled(resample_x(shift_y(br.phi, h), sc), d);
    Field dy_theta = derivative(th, Axis::Y, 1);
    const double dh_da = (grid_->L / n0_) * ((which == 0) ? -a[1] : a[0]) / (s * s);
    const double ds_da = a[which] / s;
    Field out = scaled(ds_theta, ds_da);
    axpy(out, -dh_da, dy_theta);
    return out;
}

double ModulatedFamily::beta(const AmplitudePair& a, double c) const {
    const ModulatedWave w = wave(a);
    const Field Qc = line_soliton(c, grid_);
    const double mq = inner_l2(Qc, Qc);
    const double mp = inner_l2(w.profile, w.profile);
    return c_star_ * std::pow(mq / mp, 2.0 / 3.0);
}

ModulatedWave solve_modulated_family(double c_star, const AmplitudePair& a,
                                     const GridPtr& grid, double tol) {
    ModulatedFamily fam(c_star, grid, tol);
    return fam.wave(a);
}

BifurcationCoefficients bifurcation_coefficients(ModulatedFamily& family,
                                                 const std::vector<double>& s_values) {
    if (s_values.size() < 3)
        throw std::invalid_argument("bifurcation_coefficients: need at least 3 amplitudes");
    const Field Q = line_soliton(family.c_star(), family.grid());
    const double mass_Q = inner_l2(Q, Q);

    const int n = static_cast<int>(s_values.size());
    Eigen::MatrixXd V(n, 2);
    Eigen::VectorXd dc(n), dm(n);
    for (int i = 0; i < n; ++i) {
        const auto& br = family.branch(s_values[i]);
        const double s2 = s_values[i] * s_values[i];
        V(i, 0) = s2;
        V(i, 1) = s2 * s2;
        dc[i] = br.c - family.c_star();
        dm[i] = inner_l2(br.phi, br.phi) - mass_Q;
    }
    const Eigen::VectorXd pc = V.colPivHouseholderQr().solve(dc);
    const Eigen::VectorXd pm = V.colPivHouseholderQr().solve(dm);

    BifurcationCoefficients out;
    out.C_star = 2.0 * pc[0];
    out.C2 = 2.0 * pm[0];
    out.fit_residual_speed = (V * pc - dc).norm() / std::max(1e-300, dc.norm());
    out.fit_residual_mass = (V * pm - dm).norm() / std::max(1e-300, dm.norm());
    if (out.fit_residual_speed > 0.1 || out.fit_residual_mass > 0.1)
        throw guard_error("bifurcation_coefficients: quadratic fit residual too large");
    return out;
}

Field theta(const ModulatedFamily& family, const AmplitudePair& a, double c) {
    return family.theta(a, c);
}

double beta(const ModulatedFamily& family, const AmplitudePair& a, double c) {
    return family.beta(a, c);
}

}  // namespace zk
