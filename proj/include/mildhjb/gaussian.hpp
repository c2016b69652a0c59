#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace mildhjb::gaussian {

using StateFn = std::function<double(const Eigen::VectorXd&)>;

// Element of the reproducing kernel space of a covariance Q: the ambient
// point h, its minimal-norm coordinates c with h = R c, and |h|_H = |c|_2.
struct RkhsVector {
    Eigen::VectorXd ambient;
    Eigen::VectorXd coords;
    double norm = 0.0;
};

// A centered Gaussian measure on R^dim with covariance Q, factored through
// the spectral square root: Q = R R^T with R = U sqrt(Lambda) restricted to
// eigenvalues above pinv_tol * lambda_max. Immutable after construction.
class GaussianState {
public:
    static GaussianState from_covariance(const Eigen::MatrixXd& q, double pinv_tol = 1e-10);

    int dim() const { return static_cast<int>(q_.rows()); }
    int rank() const { return rank_; }
    double pinv_tol() const { return pinv_tol_; }
    const Eigen::MatrixXd& covariance() const { return q_; }
    const Eigen::MatrixXd& factor() const { return r_; }          // dim x rank
    const Eigen::MatrixXd& factor_pinv() const { return rpinv_; } // rank x dim
    const Eigen::MatrixXd& range_basis() const { return u_; }     // dim x rank
    const Eigen::VectorXd& spectrum() const { return lam_; }      // retained eigenvalues

    // Minimal-norm RKHS representation of x, or nullopt if x is outside
    // range(Q) at tolerance (infinite RKHS norm).
    std::optional<RkhsVector> rkhs_embed(const Eigen::VectorXd& x) const;

    // phi_mu(h)(z): the L^2(mu) isometry evaluated at the state point z.
    double phi(const RkhsVector& h, const Eigen::VectorXd& z) const;

    // Cameron-Martin density rho_h(z) = exp(phi(h)(z) - |h|_H^2 / 2).
    double cameron_martin_density(const RkhsVector& h, const Eigen::VectorXd& z) const;

private:
    Eigen::MatrixXd q_, r_, rpinv_, u_;
    Eigen::VectorXd lam_;
    int rank_ = 0;
    double pinv_tol_ = 1e-10;
};

// Cubature specification; nodes are generated deterministically from it.
struct Cubature {
    enum class Kind { gauss_hermite_tensor, monte_carlo };
    Kind kind = Kind::gauss_hermite_tensor;
    int nodes_per_dim = 9;
    int sample_count = 20000;
    std::uint64_t seed = 1234;
};

// Realized rule in standardized coordinates: points are columns of `nodes`
// (rank x count), weights sum to one.
struct CubatureRule {
    Eigen::MatrixXd nodes;
    Eigen::VectorXd weights;
};
CubatureRule make_rule(const Cubature& cub, int rank);

// psi(x) = int f(x + z) mu(dz) by cubature; constants are reproduced to
// round-off because the weights sum to one.
double smooth_convolve(const GaussianState& g, const StateFn& f, const Eigen::VectorXd& x,
                       const CubatureRule& rule);

// Gradient of psi at x in H-dual coordinates (one entry per retained
// direction): entry i is int f(x+z) phi(u_i)(z) mu(dz).
Eigen::VectorXd smooth_gradient(const GaussianState& g, const StateFn& f,
                                const Eigen::VectorXd& x, const CubatureRule& rule);

// Hessian of psi at x in the orthonormal H-basis:
//   H = sum_k w_k f(x + R xi_k) (xi_k xi_k^T) - psi(x) I.
Eigen::MatrixXd smooth_hessian(const GaussianState& g, const StateFn& f,
                               const Eigen::VectorXd& x, const CubatureRule& rule);

// Partial sums of sum_n (n pi)^{-4 sigma}, the series controlling the
// gamma-radonifying embedding of the Dirichlet Laplacian example.
struct SeriesDiagnostic {
    double sigma = 0.0;
    int n_max = 0;
    double sum_quarter = 0.0;
    double sum_half = 0.0;
    double sum_full = 0.0;
    double doubling_tail = 0.0;  // sum_full - sum_half
    bool converged = false;
};
SeriesDiagnostic gamma_series_diagnostic(double sigma, int n_max = 100000);

}  // namespace mildhjb::gaussian
