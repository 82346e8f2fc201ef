#include "zk/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "zk/errors.hpp"
#include "zk/waves.hpp"

namespace zk {

namespace {

constexpr double kRealnessTol = 1e-8;   // relative imaginary-part tolerance
constexpr double kUnstableTol = 1e-6;   // Re(lambda) above this counts as unstable

Eigen::MatrixXd diff_matrix_impl(const GridPtr& grid, int order) {
    const int nx = grid->nx;
    Eigen::MatrixXd D(nx, nx);
    std::vector<std::complex<double>> col(nx), hat(nx), back(nx);
    const bool odd = (order % 2 == 1);
    for (int j = 0; j < nx; ++j) {
        std::fill(col.begin(), col.end(), std::complex<double>(0.0, 0.0));
        col[j] = 1.0;
        detail::fft1d_x(grid, col, hat, true);
        for (int m = 0; m < nx; ++m) {
            if (odd && m == nx / 2) {
                hat[m] = 0.0;
                continue;
            }
            hat[m] *= std::pow(std::complex<double>(0.0, grid->xi[m]), order);
        }
        detail::fft1d_x(grid, hat, back, false);
        for (int i = 0; i < nx; ++i) D(i, j) = back[i].real();
    }
    return D;
}

}  // namespace

int transverse_mode_bound(double c, double L) {
    if (!(c > 0.0) || !(L > 0.0))
        throw std::invalid_argument("transverse_mode_bound: c and L must be positive");
    if (!(c > 4.0 / (5.0 * L * L))) {
        std::ostringstream os;
        os << "subcritical speed c = " << c << " <= 4/(5 L^2) = " << 4.0 / (5.0 * L * L)
           << "; no unstable transverse modes";
        throw subcritical_error(os.str());
    }
    const double r = 0.5 * std::sqrt(5.0 * c) * L;  // n0-1 < r <= n0
    int n0 = static_cast<int>(std::ceil(r - 1e-12));
    if (n0 < 2) n0 = 2;
    return n0;
}

bool is_critical_speed(double c, double L, int* n_out, double rel_tol) {
    if (!(c > 0.0) || !(L > 0.0)) return false;
    const double r = 0.5 * std::sqrt(5.0 * c) * L;
    const int n = static_cast<int>(std::llround(r));
    if (n <= 1) return false;
    const double c_n = 4.0 * n * n / (5.0 * L * L);
    if (std::abs(c - c_n) <= rel_tol * c) {
        if (n_out) *n_out = n;
        return true;
    }
    return false;
}

Eigen::MatrixXd diff_matrix(const GridPtr& grid, int order) {
    if (order < 1 || order > 3) throw std::invalid_argument("diff_matrix: order must be 1..3");
    return diff_matrix_impl(grid, order);
}

Eigen::MatrixXd l_block(double c, int k, const GridPtr& grid) {
    const int nx = grid->nx;
    Eigen::MatrixXd M = -diff_matrix_impl(grid, 2);
    const double shift = c + static_cast<double>(k) * k / (grid->L * grid->L);
    for (int i = 0; i < nx; ++i) {
        M(i, i) += shift - 2.0 * soliton_value(c, grid->x[i]);
    }
    return M;
}

ModeOperator mode_operator(double c, int k, const GridPtr& grid) {
    if (k < 0) throw std::invalid_argument("mode_operator: k must be >= 0");
    ModeOperator op;
    op.k = k;
    op.c = c;
    op.matrix = diff_matrix_impl(grid, 1) * l_block(c, k, grid);
    return op;
}

Eigen::VectorXcd mode_eigenvalues(const ModeOperator& op) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix, /*computeEigenvectors=*/false);
    return es.eigenvalues();
}

std::vector<double> reflect_x(const GridPtr& grid, const std::vector<double>& v) {
    const int nx = grid->nx;
    std::vector<double> r(nx);
    for (int i = 0; i < nx; ++i) r[i] = v[(nx - i) % nx];
    return r;
}

std::vector<double> apply_l_block(double c, int k, const GridPtr& grid,
                                  const std::vector<double>& v) {
    const Eigen::MatrixXd M = l_block(c, k, grid);
    Eigen::Map<const Eigen::VectorXd> vv(v.data(), v.size());
    Eigen::VectorXd r = M * vv;
    return std::vector<double>(r.data(), r.data() + r.size());
}

UnstableSpectrum unstable_spectrum(double c_star, const GridPtr& grid) {
    UnstableSpectrum spec;
    spec.c_star = c_star;
    spec.L = grid->L;
    int n_crit = 0;
    spec.critical = is_critical_speed(c_star, grid->L, &n_crit);
    if (!(c_star > 4.0 / (5.0 * grid->L * grid->L))) {
        spec.n0 = 1;  // subcritical: empty unstable set
        return spec;
    }
    spec.n0 = transverse_mode_bound(c_star, grid->L);

    for (int k = 1; k <= spec.n0 - 1; ++k) {
        const ModeOperator op = mode_operator(c_star, k, grid);
        Eigen::EigenSolver<Eigen::MatrixXd> es(op.matrix);
        const auto& vals = es.eigenvalues();
        int best = -1;
        for (int i = 0; i < vals.size(); ++i) {
            if (vals[i].real() > kUnstableTol &&
                (best < 0 || vals[i].real() > vals[best].real()))
                best = i;
        }
        if (best < 0) {
            std::ostringstream os;
            os << "unstable_spectrum: no positive eigenvalue found for mode k=" << k
               << " at c*=" << c_star << " (resolution failure)";
            throw guard_error(os.str());
        }
        const std::complex<double> lam = vals[best];
        if (std::abs(lam.imag()) > kRealnessTol * std::max(1.0, std::abs(lam))) {
            std::ostringstream os;
            os << "unstable_spectrum: complex residual above tolerance for k=" << k
               << ", lambda = (" << lam.real() << ", " << lam.imag() << ")";
            throw guard_error(os.str());
        }

        Eigen::VectorXcd vec = es.eigenvectors().col(best);
        // realify: rotate out the arbitrary complex phase
        int imax = 0;
        for (int i = 1; i < vec.size(); ++i)
            if (std::abs(vec[i]) > std::abs(vec[imax])) imax = i;
        const std::complex<double> phase = vec[imax] / std::abs(vec[imax]);
        vec /= phase;
        double imag_norm = 0.0, real_norm = 0.0;
        for (int i = 0; i < vec.size(); ++i) {
            imag_norm += vec[i].imag() * vec[i].imag();
            real_norm += vec[i].real() * vec[i].real();
        }
        if (imag_norm > kRealnessTol * kRealnessTol * real_norm)
            throw guard_error("unstable_spectrum: eigenvector not real after phase rotation");

        EigenPair p;
        p.k = k;
        p.lambda = lam.real();
        p.f.resize(vec.size());
        for (int i = 0; i < vec.size(); ++i) p.f[i] = vec[i].real();
        // deterministic sign: positive value at the largest-magnitude node
        if (p.f[imax] < 0.0)
            for (auto& t : p.f) t = -t;
        spec.pairs.push_back(std::move(p));
    }

    spec.kappa_star = spec.pairs.empty() ? 0.0 : spec.pairs[0].lambda;
    spec.kappa_sup = spec.kappa_star;
    for (const auto& p : spec.pairs) {
        spec.kappa_star = std::min(spec.kappa_star, p.lambda);
        spec.kappa_sup = std::max(spec.kappa_sup, p.lambda);
    }
    return spec;
}

UnstableSpectrum normalize_pairs(const UnstableSpectrum& spec, const GridPtr& grid) {
    UnstableSpectrum out = spec;
    constexpr double kPi = 3.14159265358979323846;
    for (auto& p : out.pairs) {
        // 2D pairing (F^+, L F^-) with F^- = -f(-x) cos(ky/L); the y-integral
        // of cos^2 contributes pi*L, the x-part is a 1D quadrature.
        const std::vector<double> fr = reflect_x(grid, p.f);
        std::vector<double> fm(fr.size());
        for (std::size_t i = 0; i < fr.size(); ++i) fm[i] = -fr[i];
        const std::vector<double> Lfm = apply_l_block(spec.c_star, p.k, grid, fm);
        double pair1d = 0.0;
        for (std::size_t i = 0; i < Lfm.size(); ++i) pair1d += p.f[i] * Lfm[i];
        pair1d *= grid->dx;
        double pairing = kPi * grid->L * pair1d;
        if (std::abs(pairing) < 1e-10)
            throw guard_error("normalize_pairs: degenerate pairing below 1e-10");
        double sign = 1.0;
        if (pairing < 0.0) {
            sign = -1.0;  // flip the F^- convention, recorded in pairing_sign
            pairing = -pairing;
        }
        const double scale = 1.0 / std::sqrt(pairing);
        for (auto& t : p.f) t *= scale;
        p.normalization = scale;
        p.pairing_sign = sign;
    }
    out.normalized = true;
    return out;
}

double kernel_at_critical(double c, int n, const GridPtr& grid) {
    if (n < 2) throw std::invalid_argument("kernel_at_critical: n must be >= 2");
    std::vector<double> q32(grid->nx);
    for (int i = 0; i < grid->nx; ++i) q32[i] = soliton_32_value(c, grid->x[i]);
    const std::vector<double> r = apply_l_block(c, n, grid, q32);
    double rn = 0.0, qn = 0.0;
    for (int i = 0; i < grid->nx; ++i) {
        rn += r[i] * r[i];
        qn += q32[i] * q32[i];
    }
    return std::sqrt(rn / qn);
}

}  // namespace zk
