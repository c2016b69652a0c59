#include "mildhjb/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "mildhjb/errors.hpp"
#include "mildhjb/numerics.hpp"

namespace mildhjb::gaussian {

GaussianState GaussianState::from_covariance(const Eigen::MatrixXd& q, double pinv_tol) {
    if (q.rows() != q.cols()) throw ArgumentError("gaussian state: covariance must be square");
    if (pinv_tol <= 0.0) throw ArgumentError("gaussian state: pinv_tol must be positive");
    const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff()))
        throw ArgumentError("gaussian state: covariance is not symmetric");

    GaussianState g;
    g.q_ = 0.5 * (q + q.transpose());
    g.pinv_tol_ = pinv_tol;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.q_);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lam_max = ev.size() ? ev.maxCoeff() : 0.0;
    if (ev.size() && ev.minCoeff() < -1e-10 * std::max(lam_max, 1e-300))
        throw ArgumentError("gaussian state: covariance is not positive semidefinite");

    const double cutoff = pinv_tol * lam_max;
    std::vector<int> keep;
    for (int i = 0; i < ev.size(); ++i)
        if (ev(i) > cutoff) keep.push_back(i);
    g.rank_ = static_cast<int>(keep.size());
    g.u_.resize(q.rows(), g.rank_);
    g.lam_.resize(g.rank_);
    for (int k = 0; k < g.rank_; ++k) {
        g.u_.col(k) = es.eigenvectors().col(keep[k]);
        g.lam_(k) = ev(keep[k]);
    }
    g.r_ = g.u_ * g.lam_.cwiseSqrt().asDiagonal();
    g.rpinv_ = g.lam_.cwiseSqrt().cwiseInverse().asDiagonal() * g.u_.transpose();
    return g;
}

std::optional<RkhsVector> GaussianState::rkhs_embed(const Eigen::VectorXd& x) const {
    if (x.size() != q_.rows()) throw ArgumentError("rkhs_embed: dimension mismatch");
    RkhsVector h;
    h.ambient = x;
    h.coords = rpinv_ * x;
    const double residual = (x - r_ * h.coords).norm();
    if (residual > pinv_tol_ * x.norm()) return std::nullopt;
    h.norm = h.coords.norm();
    return h;
}

double GaussianState::phi(const RkhsVector& h, const Eigen::VectorXd& z) const {
    if (z.size() != q_.rows()) throw ArgumentError("phi: dimension mismatch");
    return h.coords.dot(rpinv_ * z);
}

double GaussianState::cameron_martin_density(const RkhsVector& h,
                                             const Eigen::VectorXd& z) const {
    return std::exp(phi(h, z) - 0.5 * h.norm * h.norm);
}

CubatureRule make_rule(const Cubature& cub, int rank) {
    if (rank < 0) throw ArgumentError("make_rule: negative rank");
    CubatureRule rule;
    if (rank == 0) {
        rule.nodes.resize(0, 1);
        rule.weights = Eigen::VectorXd::Ones(1);
        return rule;
    }
    if (cub.kind == Cubature::Kind::gauss_hermite_tensor) {
        const QuadRule gh = gauss_hermite(cub.nodes_per_dim);
        const int m = cub.nodes_per_dim;
        long count = 1;
        for (int d = 0; d < rank; ++d) count *= m;
        rule.nodes.resize(rank, count);
        rule.weights.resize(count);
        for (long idx = 0; idx < count; ++idx) {
            long rem = idx;
            double w = 1.0;
            for (int d = 0; d < rank; ++d) {
                const int j = static_cast<int>(rem % m);
                rem /= m;
                rule.nodes(d, idx) = gh.nodes[j];
                w *= gh.weights[j];
            }
            rule.weights(idx) = w;
        }
    } else {
        std::mt19937_64 rng(cub.seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        rule.nodes.resize(rank, cub.sample_count);
        for (int j = 0; j < cub.sample_count; ++j)
            for (int d = 0; d < rank; ++d) rule.nodes(d, j) = normal(rng);
        rule.weights = Eigen::VectorXd::Constant(cub.sample_count, 1.0 / cub.sample_count);
    }
    return rule;
}

double smooth_convolve(const GaussianState& g, const StateFn& f, const Eigen::VectorXd& x,
                       const CubatureRule& rule) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < rule.weights.size(); ++k) {
        const Eigen::VectorXd z = g.factor() * rule.nodes.col(k);
        acc += rule.weights(k) * f(x + z);
    }
    return acc;
}

Eigen::VectorXd smooth_gradient(const GaussianState& g, const StateFn& f,
                                const Eigen::VectorXd& x, const CubatureRule& rule) {
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(g.rank());
    for (Eigen::Index k = 0; k < rule.weights.size(); ++k) {
        const Eigen::VectorXd z = g.factor() * rule.nodes.col(k);
        moment.noalias() += (rule.weights(k) * f(x + z)) * rule.nodes.col(k);
    }
    return moment;
}

Eigen::MatrixXd smooth_hessian(const GaussianState& g, const StateFn& f,
                               const Eigen::VectorXd& x, const CubatureRule& rule) {
    const int r = g.rank();
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(r, r);
    double psi = 0.0;
    for (Eigen::Index k = 0; k < rule.weights.size(); ++k) {
        const Eigen::VectorXd z = g.factor() * rule.nodes.col(k);
        const double wf = rule.weights(k) * f(x + z);
        psi += wf;
        second.noalias() += wf * rule.nodes.col(k) * rule.nodes.col(k).transpose();
    }
    second -= psi * Eigen::MatrixXd::Identity(r, r);
    return 0.5 * (second + second.transpose());
}

SeriesDiagnostic gamma_series_diagnostic(double sigma, int n_max) {
    if (sigma <= 0.0) throw ArgumentError("gamma_series_diagnostic: sigma must be positive");
    if (n_max < 4 || n_max % 4 != 0)
        throw ArgumentError("gamma_series_diagnostic: n_max must be a positive multiple of 4");
    SeriesDiagnostic d;
    d.sigma = sigma;
    d.n_max = n_max;
    double sum = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        sum += std::pow(n * std::numbers::pi, -4.0 * sigma);
        if (n == n_max / 4) d.sum_quarter = sum;
        if (n == n_max / 2) d.sum_half = sum;
    }
    d.sum_full = sum;
    d.doubling_tail = d.sum_full - d.sum_half;
    d.converged = d.doubling_tail < 1e-4 * d.sum_full;
    return d;
}

}  // namespace mildhjb::gaussian
