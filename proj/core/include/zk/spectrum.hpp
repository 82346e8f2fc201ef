#ifndef ZK_SPECTRUM_HPP
#define ZK_SPECTRUM_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "zk/grid.hpp"

namespace zk {

// Smallest integer n0 >= 2 with 2(n0-1)/sqrt(5c) < L <= 2 n0/sqrt(5c).
// Unstable transverse modes are k = 1 .. n0-1. Throws subcritical_error
// for c <= 4/(5 L^2).
int transverse_mode_bound(double c, double L);

// True when c sits on the critical set {4 n^2 / (5 L^2), n > 1} to
// relative tolerance; on success stores the integer n.
bool is_critical_speed(double c, double L, int* n_out = nullptr, double rel_tol = 1e-9);

// Dense x-discretization of D_x (-D_x^2 + c + k^2/L^2 - 2 Q_c) built from
// spectral differentiation matrices on the grid's x nodes.
struct ModeOperator {
    int k = 0;
    double c = 0.0;
    Eigen::MatrixXd matrix;
};

ModeOperator mode_operator(double c, int k, const GridPtr& grid);

// Dense spectral differentiation matrix of given order (odd orders have
// the Nyquist column zeroed, matching the 2D transform conventions).
Eigen::MatrixXd diff_matrix(const GridPtr& grid, int order);

// The symmetric x-block  -D_x^2 + c + k^2/L^2 - 2 Q_c.
Eigen::MatrixXd l_block(double c, int k, const GridPtr& grid);

struct EigenPair {
    int k = 0;              // transverse mode
    double lambda = 0.0;    // positive eigenvalue of D_x L_k
    std::vector<double> f;  // 1D profile, pairing-normalized
    double normalization = 1.0;  // scale applied to the raw eigenvector
    double pairing_sign = 1.0;   // sign convention applied to F^-
};

struct UnstableSpectrum {
    double c_star = 0.0;
    double L = 0.0;
    int n0 = 1;             // 1 means subcritical (no unstable modes)
    bool critical = false;  // c_star in CS
    bool normalized = false;
    std::vector<EigenPair> pairs;  // k = 1 .. n0-1
    double kappa_star = 0.0;       // min_k lambda_k
    double kappa_sup = 0.0;        // max_k lambda_k
};

// Solves the dense eigenproblem of every expected-unstable mode. Returns
// an empty spectrum (n0 = 1) below the instability threshold.
UnstableSpectrum unstable_spectrum(double c_star, const GridPtr& grid);

// Rescales each profile so (F_k^{+,j}, L_{c*} F_k^{-,j})_{L2} = 1, with
// F^- built from F^+ by the reflection rule -f(-x)*{cos,sin}(ky/L).
UnstableSpectrum normalize_pairs(const UnstableSpectrum& spec, const GridPtr& grid);

// || (-d^2/dx^2 + c + n^2/L^2 - 2 Q_c) Q_c^{3/2} || / || Q_c^{3/2} ||.
// Vanishes exactly at c = 4 n^2 / (5 L^2).
double kernel_at_critical(double c, int n, const GridPtr& grid);

// All eigenvalues of a mode operator (diagnostics / property tests).
Eigen::VectorXcd mode_eigenvalues(const ModeOperator& op);

// Reflection g(x) = v(-x) on the periodic x-grid.
std::vector<double> reflect_x(const GridPtr& grid, const std::vector<double>& v);

// Dense apply of the symmetric block to a 1D profile.
std::vector<double> apply_l_block(double c, int k, const GridPtr& grid,
                                  const std::vector<double>& v);

}  // namespace zk

#endif
