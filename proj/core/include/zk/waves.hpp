#ifndef ZK_WAVES_HPP
#define ZK_WAVES_HPP

#include "zk/grid.hpp"

namespace zk {

// Closed-form line solitary wave Q_c(x) = (3c/2) sech^2(sqrt(c) x / 2),
// sampled y-independently.
Field line_soliton(double c, const GridPtr& grid);

// Analytic parameter derivatives of the line soliton.
struct SolitonDerivatives {
    Field dx;  // d/dx Q_c
    Field dc;  // d/dc Q_c
};
SolitonDerivatives soliton_derivatives(double c, const GridPtr& grid);

// (3c/2)^{3/2} sech^3(sqrt(c) x / 2) times cos/sin(n y / L); the extra
// kernel directions of the linearization at critical speeds.
Field soliton_32_cos(double c, int n, const GridPtr& grid);
Field soliton_32_sin(double c, int n, const GridPtr& grid);

// Mass, energy, and action S_c = E + (c/2) M by spectral quadrature.
struct Functionals {
    double M;
    double E;
    double S;
};
Functionals functionals(const Field& u, double c);

// inf over shifts q of ||u - tau_q Q_{c*}||_{H1}; coarse FFT correlation
// scan in q followed by golden-section refinement.
struct TubeDistance {
    double dist;
    double q;  // minimizing shift
};
TubeDistance tube_distance(const Field& u, double c_star);

// Scalar evaluators used by 1D per-mode operators.
double soliton_value(double c, double x);
double soliton_dx_value(double c, double x);
double soliton_dc_value(double c, double x);
double soliton_32_value(double c, double x);

}  // namespace zk

#endif
