#ifndef ZK_FAMILY_HPP
#define ZK_FAMILY_HPP

#include <array>
#include <map>
#include <memory>
#include <optional>

#include "zk/grid.hpp"

namespace zk {

using AmplitudePair = std::array<double, 2>;

// One member of the bifurcated solitary-wave family at a critical speed:
// -Delta phi + c_check(a) phi - phi^2 = 0 pinned by the kernel-mode
// amplitudes a = (a0, a1).
struct ModulatedWave {
    AmplitudePair a{0.0, 0.0};
    Field profile;        // phi_{c*}(a)
    double speed = 0.0;   // c_check(a)
    double residual = 0.0;  // stationary-equation residual norm on the grid
};

// Newton continuation of the family at fixed c* in CS. Solves at a = (s, 0)
// in an even (cos x cos) Galerkin basis; general a is the exact y-rotation
// of the s-branch. Caches branch solves and their parameter derivatives.
class ModulatedFamily {
  public:
    ModulatedFamily(double c_star, GridPtr grid, double tol = 1e-11);

    double c_star() const { return c_star_; }
    int n0() const { return n0_; }
    const GridPtr& grid() const { return grid_; }
    double tol() const { return tol_; }

    // Family member for general small amplitude pair.
    ModulatedWave wave(const AmplitudePair& a) const;

    // Branch data at a = (s, 0), s >= 0.
    struct Branch {
        Field phi;        // profile
        Field dphi_ds;    // branch derivative d phi / ds
        double c = 0.0;   // c_check(s)
        double dc_ds = 0.0;
        double residual = 0.0;
    };
    const Branch& branch(double s) const;

    // Modulated solitary wave Theta(a, c) = (c/c*) phi_{c*}(a)(sqrt(c/c*) x, y)
    // and its analytic parameter derivatives, all resampled spectrally.
    Field theta(const AmplitudePair& a, double c) const;
    Field theta_dx(const AmplitudePair& a, double c) const;
    Field theta_dc(const AmplitudePair& a, double c) const;
    // d/d a0, d/d a1 at the given amplitude (kernel modes at a = 0).
    Field theta_da(const AmplitudePair& a, double c, int which) const;

    // Mass-matching speed beta(a, c) = c* ||Q_c||^{4/3} / ||phi(a)||^{4/3}.
    double beta(const AmplitudePair& a, double c) const;

  private:
    double c_star_;
    GridPtr grid_;
    double tol_;
    int n0_ = 0;
    mutable std::map<long long, std::shared_ptr<Branch>> cache_;

    std::shared_ptr<Branch> solve_branch(double s) const;
};

// Convenience wrapper matching the one-shot operation shape.
ModulatedWave solve_modulated_family(double c_star, const AmplitudePair& a,
                                     const GridPtr& grid, double tol = 1e-11);

// Quadratic coefficients of the branch expansions
//   c_check(a)  = c* + (C_*/2)   |a|^2 + o(|a|^2)
//   ||phi(a)||^2 = ||Q||^2 + (C_2/2) |a|^2 + o(|a|^2)
// by least-squares fits over a small amplitude ladder.
struct BifurcationCoefficients {
    double C_star = 0.0;
    double C2 = 0.0;
    double fit_residual_speed = 0.0;
    double fit_residual_mass = 0.0;
};
BifurcationCoefficients bifurcation_coefficients(ModulatedFamily& family,
                                                 const std::vector<double>& s_values);

// Free-function forms used by experiments.
Field theta(const ModulatedFamily& family, const AmplitudePair& a, double c);
double beta(const ModulatedFamily& family, const AmplitudePair& a, double c);

// Spectral x-resampling helper u(x, y) -> u(scale * x, y).
Field resample_x(const Field& f, double scale);

}  // namespace zk

#endif
