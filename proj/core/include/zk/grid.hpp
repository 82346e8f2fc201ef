#ifndef ZK_GRID_HPP
#define ZK_GRID_HPP

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

namespace zk {

// Uniform tensor grid on the truncated cylinder [-X, X) x [0, 2*pi*L).
// Both directions are treated as periodic; x-truncation relies on the
// exponential decay of every profile this lab works with.
struct CylGrid {
    int nx = 0;
    int ny = 0;
    double X = 0.0;  // half-width of the x box
    double L = 0.0;  // transverse period parameter, y-period = 2*pi*L
    double dx = 0.0;
    double dy = 0.0;
    std::vector<double> x;    // nodes, x[i] = -X + i*dx
    std::vector<double> y;    // y[j] = j*dy
    std::vector<double> xi;   // wavenumbers in FFT bin order, xi[m] = pi*m'/X
    std::vector<double> eta;  // eta[n] = n'/L

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * ny + j; }
    bool same_layout(const CylGrid& o) const {
        return nx == o.nx && ny == o.ny && X == o.X && L == o.L;
    }
};

using GridPtr = std::shared_ptr<const CylGrid>;

// Validates and builds a grid with its wavenumber tables.
GridPtr make_grid(int nx, int ny, double X, double L);

// Real-valued state sampled on a grid, x-major storage:
// values[i*ny + j] = u(x[i], y[j]).
struct Field {
    GridPtr grid;
    std::vector<double> v;

    Field() = default;
    explicit Field(GridPtr g) : grid(std::move(g)), v(grid->size(), 0.0) {}
    double& at(int i, int j) { return v[grid->idx(i, j)]; }
    double at(int i, int j) const { return v[grid->idx(i, j)]; }
};

// Fourier coefficients with respect to exp(i*(xi*x + eta*y)) in physical
// coordinates (the x-offset phase is folded in, so entries are true
// coefficients of the trigonometric interpolant). Same x-major layout as
// Field, bins in FFT order.
struct SpectralField {
    GridPtr grid;
    std::vector<std::complex<double>> c;

    SpectralField() = default;
    explicit SpectralField(GridPtr g) : grid(std::move(g)), c(grid->size(), {0.0, 0.0}) {}
};

enum class Axis { X, Y };

SpectralField to_spectral(const Field& f);
Field from_spectral(const SpectralField& F);

// Spectral differentiation, order in {1,2,3}. Odd orders zero the Nyquist
// bins so real input stays real.
Field derivative(const Field& f, Axis axis, int order);
SpectralField derivative(const SpectralField& F, Axis axis, int order);

// Quadrature of f*g over the cylinder (uniform Riemann sum, spectrally
// accurate for smooth periodic integrands).
double inner_l2(const Field& f, const Field& g);
double norm_l2(const Field& f);

// H1 pairing sum (1 + |k|^2) f_hat conj(g_hat) * area.
double inner_h1(const Field& f, const Field& g);
double norm_h1(const Field& f);

// Two-thirds rule: zero every bin with |m'| > nx/3 or |n'| > ny/3.
SpectralField dealias(const SpectralField& F);
Field dealias(const Field& f);

// Translations u(x - q, y) and u(x, y - h) by arbitrary real shifts,
// applied as spectral phases (Nyquist bins get the cos-projected phase).
Field shift_x(const Field& f, double q);
Field shift_y(const Field& f, double h);

// Max |C(-k) - conj(C(k))| over bins; zero for coefficients of a real field.
double hermitian_error(const SpectralField& F);

// In-place helpers used all over the lab.
void axpy(Field& y, double a, const Field& x);  // y += a*x
Field scaled(const Field& f, double a);
Field added(const Field& f, const Field& g);
Field subtracted(const Field& f, const Field& g);

double max_abs(const Field& f);
bool all_finite(const Field& f);

// Deterministic random smooth field: Gaussian bin amplitudes with
// exp(-|k|^2/(2 sigma^2)) decay, Hermitian-symmetrized, unit L2.
Field random_smooth_field(const GridPtr& grid, std::uint64_t seed, double sigma = 2.0);

namespace detail {
// 1D FFT helpers for the per-mode dense operators (same coefficient
// convention as the 2D transform, folded x-offset phase).
void fft1d_x(const GridPtr& grid, const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out, bool forward);
}  // namespace detail

}  // namespace zk

#endif
