#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mildhjb {

// Matrix exponential by scaling-and-squaring with a fixed Pade(13,13)
// approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

// One frozen-coefficient substep for the linear system y' = -A y driven by
// white noise with intensity N = G G^T:
//   flow  = exp(-h A)
//   noise = \int_0^h exp(-u A) N exp(-u A^T) du
// computed exactly (up to expm round-off) from the exponential of the
// 2n x 2n block matrix [[A, N], [0, -A^T]] * h (Van Loan).
struct CellStep {
    Eigen::MatrixXd flow;
    Eigen::MatrixXd noise;
};
CellStep frozen_step(const Eigen::MatrixXd& a, const Eigen::MatrixXd& n, double h);
Eigen::MatrixXd frozen_flow(const Eigen::MatrixXd& a, double h);

// 8-point Gauss-Legendre rule on [-1, 1].
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const QuadRule& gauss_legendre_8();

// Gauss-Hermite rule for the standard normal weight e^{-x^2/2}/sqrt(2 pi),
// via Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
// recurrence. Weights are normalized to sum to one.
QuadRule gauss_hermite(int n);

// Least-squares line through (log x_i, log y_i). residual is the RMS of the
// log-space misfit.
struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};
LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

// Fractional power (A + w I)^theta through a complex eigendecomposition,
// taking principal powers of the eigenvalues. Requires the shifted spectrum
// to stay off the closed negative real axis.
Eigen::MatrixXd fractional_power(const Eigen::MatrixXd& a, double theta, double shift_w = 0.0);

// Shortest decimal that round-trips a double ("%.17g" fallback).
std::string format_double(double x);

// Spectral norm (largest singular value).
double spectral_norm(const Eigen::MatrixXd& a);

}  // namespace mildhjb
