#include "zk/waves.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "zk/errors.hpp"

namespace zk {

namespace {

constexpr double kPi = 3.14159265358979323846;

// sech via exp(-|x|) to avoid overflow in cosh at large arguments.
inline double sech(double t) {
    const double e = std::exp(-std::abs(t));
    return 2.0 * e / (1.0 + e * e);
}

inline void require_positive_speed(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("wave speed c must be positive");
}

// Golden-section minimization of a smooth unimodal objective on [a, b].
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

double soliton_value(double c, double x) {
    const double s = sech(0.5 * std::sqrt(c) * x);
    return 1.5 * c * s * s;
}

double soliton_dx_value(double c, double x) {
    const double u = 0.5 * std::sqrt(c) * x;
    const double s = sech(u);
    return -1.5 * std::pow(c, 1.5) * s * s * std::tanh(u);
}

double soliton_dc_value(double c, double x) {
    const double u = 0.5 * std::sqrt(c) * x;
    const double s = sech(u);
    return 1.5 * s * s - 0.75 * std::sqrt(c) * x * s * s * std::tanh(u);
}

double soliton_32_value(double c, double x) {
    const double s = sech(0.5 * std::sqrt(c) * x);
    return std::pow(1.5 * c, 1.5) * s * s * s;
}

Field line_soliton(double c, const GridPtr& grid) {
    require_positive_speed(c);
    Field f(grid);
    for (int i = 0; i < grid->nx; ++i) {
        const double q = soliton_value(c, grid->x[i]);
        for (int j = 0; j < grid->ny; ++j) f.at(i, j) = q;
    }
    return f;
}

SolitonDerivatives soliton_derivatives(double c, const GridPtr& grid) {
    require_positive_speed(c);
    SolitonDerivatives d{Field(grid), Field(grid)};
    for (int i = 0; i < grid->nx; ++i) {
        const double gx = soliton_dx_value(c, grid->x[i]);
        const double gc = soliton_dc_value(c, grid->x[i]);
        for (int j = 0; j < grid->ny; ++j) {
            d.dx.at(i, j) = gx;
            d.dc.at(i, j) = gc;
        }
    }
    return d;
}

Field soliton_32_cos(double c, int n, const GridPtr& grid) {
    require_positive_speed(c);
    Field f(grid);
    for (int i = 0; i < grid->nx; ++i) {
        const double q = soliton_32_value(c, grid->x[i]);
        for (int j = 0; j < grid->ny; ++j)
            f.at(i, j) = q * std::cos(n * grid->y[j] / grid->L);
    }
    return f;
}

Field soliton_32_sin(double c, int n, const GridPtr& grid) {
    require_positive_speed(c);
    Field f(grid);
    for (int i = 0; i < grid->nx; ++i) {
        const double q = soliton_32_value(c, grid->x[i]);
        for (int j = 0; j < grid->ny; ++j)
            f.at(i, j) = q * std::sin(n * grid->y[j] / grid->L);
    }
    return f;
}

Functionals functionals(const Field& u, double c) {
    const Field ux = derivative(u, Axis::X, 1);
    const Field uy = derivative(u, Axis::Y, 1);
    const double mass = inner_l2(u, u);
    double cubic = 0.0;
    for (double v : u.v) cubic += v * v * v;
    cubic *= u.grid->dx * u.grid->dy;
    const double grad2 = inner_l2(ux, ux) + inner_l2(uy, uy);
    Functionals f;
    f.M = mass;
    f.E = 0.5 * grad2 - cubic / 3.0;
    f.S = f.E + 0.5 * c * f.M;
    return f;
}

TubeDistance tube_distance(const Field& u, double c_star) {
    require_positive_speed(c_star);
    const auto& g = *u.grid;
    const Field Q = line_soliton(c_star, u.grid);
    const SpectralField U = to_spectral(u);
    const SpectralField Qs = to_spectral(Q);
    const double area = 2.0 * g.X * 2.0 * kPi * g.L;

    // H1 cross term <u, tau_q Q> for all grid shifts in one inverse DFT:
    // Q lives at eta = 0, so the sum collapses onto the x-bins.
    std::vector<std::complex<double>> corr(g.nx, 0.0);
    for (int i = 0; i < g.nx; ++i) {
        const double w = 1.0 + g.xi[i] * g.xi[i];
        corr[i] = w * U.c[g.idx(i, 0)] * std::conj(Qs.c[g.idx(i, 0)]);
    }
    // g(q) = area * sum_m corr_m e^{i xi_m q}; at q = r*dx the phase matches
    // a backward DFT with the x-offset folded (fft1d_x handles that).
    std::vector<std::complex<double>> gq;
    detail::fft1d_x(u.grid, corr, gq, false);

    const double nu2 = inner_h1(u, u);
    const double nq2 = inner_h1(Q, Q);
    int best = 0;
    double best_val = 1e300;
    for (int r = 0; r < g.nx; ++r) {
        // fft1d_x backward evaluates at x[r] = -X + r dx; shift q = x[r].
        const double d2 = nu2 + nq2 - 2.0 * area * gq[r].real();
        if (d2 < best_val) {
            best_val = d2;
            best = r;
        }
    }
    const double q0 = g.x[best];

    auto objective = [&](double q) {
        std::complex<double> s(0.0, 0.0);
        for (int i = 0; i < g.nx; ++i)
            s += corr[i] * std::exp(std::complex<double>(0.0, g.xi[i] * q));
        return nu2 + nq2 - 2.0 * area * s.real();
    };
    const double q = golden_min(objective, q0 - g.dx, q0 + g.dx, 1e-8);
    const double d2 = std::max(0.0, objective(q));
    return {std::sqrt(d2), q};
}

}  // namespace zk
