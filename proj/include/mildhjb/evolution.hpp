#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mildhjb/numerics.hpp"

namespace mildhjb::evolution {

using ScalarField = std::function<double(double t, double xi)>;

// Time-dependent coefficients of the second-order operator
//   (A_t x)(xi) = -a(t,xi) x''(xi) + b(t,xi) x'(xi) + c(t,xi) x(xi)
// on (0,1) with Dirichlet boundary, plus the noise intensity g(t,xi) and the
// Hoelder/sector metadata carried along as assumptions on the input.
struct CoefficientField {
    ScalarField a, b, c, g;
    double horizon = 1.0;           // T
    double holder_mu = 0.5;         // in (1/4, 1]
    double sector_shift_w = 0.0;    // >= 0
    double space_holder_eps = 1.0;  // > 0
    // Bounds of |g| measured on the sample grid; k1 <= |g| <= k2 with k1 > 0.
    double g_lower = 0.0;
    double g_upper = 0.0;

    // Builds a named coefficient set. Known names: "constant",
    // "linear_in_time", "lp_example". Unknown parameter keys are errors.
    static CoefficientField builtin(const std::string& name,
                                    const std::map<std::string, double>& params,
                                    double horizon);

    // Tabulated coefficients on a (time x space) lattice with bilinear
    // interpolation; CSV columns t,xi,a,b,c,g.
    static CoefficientField from_lattice_csv(const std::string& path, double horizon);

    // Ellipticity and noise-bound checks on a dense sample grid.
    // Throws NumericalError(ELLIPTICITY / NOISE_BOUND) on violation.
    void validate(int time_samples = 49, int space_samples = 49);
};

// First N modes of the Dirichlet sine basis e_n(xi) = sqrt(2) sin(n pi xi),
// the eigenbasis of -d^2/dxi^2 with eigenvalues (n pi)^2.
struct SpectralBasis {
    explicit SpectralBasis(int modes);

    int modes;
    Eigen::VectorXd eigenvalues;  // lambda_n = (n pi)^2

    double eval(int n, double xi) const;        // e_n(xi), n is 1-based
    double eval_deriv(int n, double xi) const;  // e_n'(xi)
};

// Galerkin matrix of A_t in the sine basis; entry (m,n) is
//   int_0^1 e_m [ a lambda_n e_n + b e_n' + c e_n ] dxi
// by composite 8-node Gauss-Legendre quadrature over 4N elements.
// Throws NumericalError(ELLIPTICITY) if a(t, .) <= 0 at a quadrature node.
Eigen::MatrixXd assemble_operator(const CoefficientField& coeffs, double t,
                                  const SpectralBasis& basis);

// Galerkin matrix of multiplication by f(t, .) (same quadrature).
Eigen::MatrixXd galerkin_multiplication(const ScalarField& f, double t,
                                        const SpectralBasis& basis);

// Evolution family S(t,s) generated by -A(t), built by midpoint-frozen
// matrix exponentials on a fixed substep grid. All queries snap to the
// substep grid, so S(t,s) = S(t,r) S(r,s) holds to round-off by
// construction for any grid-aligned s <= r <= t.
class Propagator {
public:
    Propagator(const CoefficientField& coeffs, const SpectralBasis& basis,
               int time_cells, int substeps_per_cell);

    int time_cells() const { return time_cells_; }
    int substeps_per_cell() const { return substeps_; }
    double horizon() const { return horizon_; }
    int dim() const { return dim_; }

    // Substep grid (size steps()+1), t_0 = 0 < ... < T.
    const std::vector<double>& grid() const { return grid_; }
    int steps() const { return static_cast<int>(flows_.size()); }

    // Nearest substep index; sets *snapped if the query was off-grid.
    int snap(double t, bool* snapped = nullptr) const;

    // S(grid[j], grid[i]) for i <= j, fixed right-to-left accumulation.
    Eigen::MatrixXd matrix_by_index(int i, int j) const;

    // S(t,s) with snapping (records a warning count for off-grid queries).
    Eigen::MatrixXd operator()(double s, double t) const;

    // Flow over [grid[i], grid[i+1]] (the cached substep factor).
    const Eigen::MatrixXd& substep_flow(int i) const { return flows_[i]; }

    // Flow over an arbitrary fragment [r0, r1], frozen at the fragment
    // midpoint. Used for continuous-time evaluation inside the HJB solver.
    Eigen::MatrixXd fragment_flow(double r0, double r1) const;

    // S(t, grid[i]) for continuous t >= grid[i]: full substeps then a
    // fragment.
    Eigen::MatrixXd flow_from_index(int i, double t) const;

    const CoefficientField& coefficients() const { return *coeffs_; }
    const SpectralBasis& basis() const { return *basis_; }
    long snap_count() const { return snap_count_; }

private:
    const CoefficientField* coeffs_;
    const SpectralBasis* basis_;
    int time_cells_;
    int substeps_;
    int dim_;
    double horizon_;
    std::vector<double> grid_;
    std::vector<Eigen::MatrixXd> flows_;
    mutable long snap_count_ = 0;
};

// Least-squares exponent of || (A(t)+wI)^theta S(t,s) ||_2 against (t-s).
struct ExponentFit {
    double exponent = 0.0;  // fitted slope
    double residual = 0.0;
    std::vector<double> gaps;   // t - s per pair
    std::vector<double> norms;  // matching norms
};
ExponentFit smoothing_exponent_probe(const Propagator& prop, double theta,
                                     const std::vector<std::pair<double, double>>& pairs);

// Pair set {k_i h} suitable for the exponent/alpha fits on a given substep
// grid: at least `min_pairs` pairs spanning >= 1.5 decades of t-s. Throws
// NumericalError(FIT_SPAN) when the grid cannot host such a set.
std::vector<std::pair<double, double>> fit_pairs_on_grid(const Propagator& prop,
                                                         int min_pairs = 6);

}  // namespace mildhjb::evolution
