#include "zk/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>

#include "zk/errors.hpp"

namespace zk {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_same_grid(const Field& f, const Field& g) {
    if (!f.grid || !g.grid || !f.grid->same_layout(*g.grid))
        throw std::invalid_argument("grid mismatch between fields");
}

// One FFTW plan pair per (nx, ny); execution serialized per engine.
class FftEngine {
  public:
    FftEngine(int nx, int ny) : n_(static_cast<std::size_t>(nx) * ny) {
        buf_ = fftw_alloc_complex(n_);
        fwd_ = fftw_plan_dft_2d(nx, ny, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(nx, ny, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~FftEngine() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    FftEngine(const FftEngine&) = delete;
    FftEngine& operator=(const FftEngine&) = delete;

    void run(std::vector<std::complex<double>>& data, bool forward) {
        std::lock_guard<std::mutex> lk(mu_);
        auto* b = reinterpret_cast<std::complex<double>*>(buf_);
        std::copy(data.begin(), data.end(), b);
        fftw_execute(forward ? fwd_ : bwd_);
        std::copy(b, b + n_, data.begin());
    }

  private:
    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
    std::mutex mu_;
};

FftEngine& engine_for(int nx, int ny) {
    static std::mutex reg_mu;
    static std::map<std::pair<int, int>, std::unique_ptr<FftEngine>> registry;
    std::lock_guard<std::mutex> lk(reg_mu);
    auto key = std::make_pair(nx, ny);
    auto it = registry.find(key);
    if (it == registry.end())
        it = registry.emplace(key, std::make_unique<FftEngine>(nx, ny)).first;
    return *it->second;
}

// Signed bin frequency for FFT layout index m of an even-length transform.
inline int signed_bin(int m, int n) { return m <= n / 2 - 1 ? m : m - n; }

// Offset phase (-1)^m' folding x[0] = -X into true coefficients.
inline double x_offset_sign(int m, int nx) { return (signed_bin(m, nx) % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

GridPtr make_grid(int nx, int ny, double X, double L) {
    std::ostringstream err;
    if (nx < 8 || nx % 2 != 0) err << "nx must be even and >= 8, got " << nx;
    else if (ny < 8 || ny % 2 != 0) err << "ny must be even and >= 8, got " << ny;
    else if (!(X > 0.0)) err << "X must be positive, got " << X;
    else if (!(L > 0.0)) err << "L must be positive, got " << L;
    const auto msg = err.str();
    if (!msg.empty()) throw std::invalid_argument("make_grid: " + msg);

    auto g = std::make_shared<CylGrid>();
    g->nx = nx;
    g->ny = ny;
    g->X = X;
    g->L = L;
    g->dx = 2.0 * X / nx;
    g->dy = 2.0 * kPi * L / ny;
    g->x.resize(nx);
    g->y.resize(ny);
    g->xi.resize(nx);
    g->eta.resize(ny);
    for (int i = 0; i < nx; ++i) {
        g->x[i] = -X + i * g->dx;
        g->xi[i] = kPi * signed_bin(i, nx) / X;
    }
    for (int j = 0; j < ny; ++j) {
        g->y[j] = j * g->dy;
        g->eta[j] = signed_bin(j, ny) / L;
    }
    return g;
}

SpectralField to_spectral(const Field& f) {
    if (!f.grid || f.v.size() != f.grid->size())
        throw std::invalid_argument("to_spectral: field shape does not match grid");
    const auto& g = *f.grid;
    SpectralField F(f.grid);
    std::vector<std::complex<double>> work(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) work[p] = f.v[p];
    engine_for(g.nx, g.ny).run(work, true);
    const double scale = 1.0 / static_cast<double>(g.size());
    for (int i = 0; i < g.nx; ++i) {
        const double sgn = x_offset_sign(i, g.nx);
        for (int j = 0; j < g.ny; ++j)
            F.c[g.idx(i, j)] = work[g.idx(i, j)] * (scale * sgn);
    }
    return F;
}

Field from_spectral(const SpectralField& F) {
    if (!F.grid || F.c.size() != F.grid->size())
        throw std::invalid_argument("from_spectral: coefficient shape does not match grid");
    const auto& g = *F.grid;
    std::vector<std::complex<double>> work(g.size());
    for (int i = 0; i < g.nx; ++i) {
        const double sgn = x_offset_sign(i, g.nx);
        for (int j = 0; j < g.ny; ++j)
            work[g.idx(i, j)] = F.c[g.idx(i, j)] * sgn;
    }
    engine_for(g.nx, g.ny).run(work, false);
    Field f(F.grid);
    for (std::size_t p = 0; p < g.size(); ++p) f.v[p] = work[p].real();
    return f;
}

SpectralField derivative(const SpectralField& F, Axis axis, int order) {
    if (order < 1 || order > 3)
        throw std::invalid_argument("derivative: order must be 1, 2 or 3");
    const auto& g = *F.grid;
    SpectralField D(F.grid);
    const bool odd = (order % 2 == 1);
    for (int i = 0; i < g.nx; ++i) {
        for (int j = 0; j < g.ny; ++j) {
            const double k = (axis == Axis::X) ? g.xi[i] : g.eta[j];
            const bool nyq = (axis == Axis::X) ? (i == g.nx / 2) : (j == g.ny / 2);
            if (odd && nyq) continue;
            std::complex<double> m = std::pow(std::complex<double>(0.0, k), order);
            D.c[g.idx(i, j)] = F.c[g.idx(i, j)] * m;
        }
    }
    return D;
}

Field derivative(const Field& f, Axis axis, int order) {
    return from_spectral(derivative(to_spectral(f), axis, order));
}

double inner_l2(const Field& f, const Field& g) {
    check_same_grid(f, g);
    double s = 0.0;
    for (std::size_t p = 0; p < f.v.size(); ++p) s += f.v[p] * g.v[p];
    return s * f.grid->dx * f.grid->dy;
}

double norm_l2(const Field& f) { return std::sqrt(std::max(0.0, inner_l2(f, f))); }

double inner_h1(const Field& f, const Field& g) {
    check_same_grid(f, g);
    const auto F = to_spectral(f);
    const auto G = to_spectral(g);
    const auto& gr = *f.grid;
    const double area = 2.0 * gr.X * 2.0 * kPi * gr.L;
    double s = 0.0;
    for (int i = 0; i < gr.nx; ++i)
        for (int j = 0; j < gr.ny; ++j) {
            const double w = 1.0 + gr.xi[i] * gr.xi[i] + gr.eta[j] * gr.eta[j];
            s += w * (F.c[gr.idx(i, j)] * std::conj(G.c[gr.idx(i, j)])).real();
        }
    return s * area;
}

double norm_h1(const Field& f) { return std::sqrt(std::max(0.0, inner_h1(f, f))); }

SpectralField dealias(const SpectralField& F) {
    const auto& g = *F.grid;
    SpectralField D = F;
    const int mx = g.nx / 3;
    const int my = g.ny / 3;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            if (std::abs(signed_bin(i, g.nx)) > mx || std::abs(signed_bin(j, g.ny)) > my)
                D.c[g.idx(i, j)] = 0.0;
        }
    return D;
}

Field dealias(const Field& f) { return from_spectral(dealias(to_spectral(f))); }

namespace {

Field shift_impl(const Field& f, double q, Axis axis) {
    const auto& g = *f.grid;
    SpectralField F = to_spectral(f);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            const double k = (axis == Axis::X) ? g.xi[i] : g.eta[j];
            const bool nyq = (axis == Axis::X) ? (i == g.nx / 2) : (j == g.ny / 2);
            if (nyq)
                F.c[g.idx(i, j)] *= std::cos(k * q);
            else
                F.c[g.idx(i, j)] *= std::exp(std::complex<double>(0.0, -k * q));
        }
    return from_spectral(F);
}

}  // namespace

Field shift_x(const Field& f, double q) { return shift_impl(f, q, Axis::X); }
Field shift_y(const Field& f, double h) { return shift_impl(f, h, Axis::Y); }

double hermitian_error(const SpectralField& F) {
    const auto& g = *F.grid;
    double worst = 0.0;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            const int in = (g.nx - i) % g.nx;
            const int jn = (g.ny - j) % g.ny;
            const auto d = F.c[g.idx(in, jn)] - std::conj(F.c[g.idx(i, j)]);
            worst = std::max(worst, std::abs(d));
        }
    return worst;
}

void axpy(Field& y, double a, const Field& x) {
    check_same_grid(y, x);
    for (std::size_t p = 0; p < y.v.size(); ++p) y.v[p] += a * x.v[p];
}

Field scaled(const Field& f, double a) {
    Field r = f;
    for (auto& u : r.v) u *= a;
    return r;
}

Field added(const Field& f, const Field& g) {
    check_same_grid(f, g);
    Field r = f;
    for (std::size_t p = 0; p < r.v.size(); ++p) r.v[p] += g.v[p];
    return r;
}

Field subtracted(const Field& f, const Field& g) {
    check_same_grid(f, g);
    Field r = f;
    for (std::size_t p = 0; p < r.v.size(); ++p) r.v[p] -= g.v[p];
    return r;
}

double max_abs(const Field& f) {
    double m = 0.0;
    for (double u : f.v) m = std::max(m, std::abs(u));
    return m;
}

bool all_finite(const Field& f) {
    for (double u : f.v)
        if (!std::isfinite(u)) return false;
    return true;
}

Field random_smooth_field(const GridPtr& grid, std::uint64_t seed, double sigma) {
    const auto& g = *grid;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpectralField F(grid);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            if (i == g.nx / 2 || j == g.ny / 2) continue;  // skip Nyquist
            const double k2 = g.xi[i] * g.xi[i] + g.eta[j] * g.eta[j];
            const double amp = std::exp(-k2 / (2.0 * sigma * sigma));
            F.c[g.idx(i, j)] = amp * std::complex<double>(gauss(rng), gauss(rng));
        }
    // Hermitian symmetrization so the state is real.
    SpectralField H(grid);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            const int in = (g.nx - i) % g.nx;
            const int jn = (g.ny - j) % g.ny;
            H.c[g.idx(i, j)] = 0.5 * (F.c[g.idx(i, j)] + std::conj(F.c[g.idx(in, jn)]));
        }
    Field f = from_spectral(H);
    const double n = norm_l2(f);
    if (n > 0) f = scaled(f, 1.0 / n);
    return f;
}

namespace detail {

void fft1d_x(const GridPtr& grid, const std::vector<std::complex<double>>& in,
             std::vector<std::complex<double>>& out, bool forward) {
    const int nx = grid->nx;
    if (static_cast<int>(in.size()) != nx)
        throw std::invalid_argument("fft1d_x: size mismatch");
    out = in;
    if (!forward) {
        // caller passes true coefficients; fold the x-offset phase back in
        for (int m = 0; m < nx; ++m) out[m] *= x_offset_sign(m, nx);
    }
    static std::mutex mu;
    std::lock_guard<std::mutex> lk(mu);
    fftw_complex* buf = fftw_alloc_complex(nx);
    auto* b = reinterpret_cast<std::complex<double>*>(buf);
    std::copy(out.begin(), out.end(), b);
    fftw_plan plan = fftw_plan_dft_1d(nx, buf, buf, forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    std::copy(b, b + nx, out.begin());
    fftw_free(buf);
    if (forward) {
        const double scale = 1.0 / nx;
        for (int m = 0; m < nx; ++m) out[m] *= scale * x_offset_sign(m, nx);
    }
}

}  // namespace detail

}  // namespace zk
