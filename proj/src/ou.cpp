#include "mildhjb/ou.hpp"

#include <algorithm>
#include <cmath>

#include "mildhjb/errors.hpp"
#include "mildhjb/numerics.hpp"

namespace mildhjb::ou {

using evolution::assemble_operator;
using evolution::galerkin_multiplication;

Engine::Engine(const evolution::Propagator& prop, double pinv_tol)
    : prop_(&prop), pinv_tol_(pinv_tol) {
    if (pinv_tol <= 0.0) throw ArgumentError("ou engine: pinv_tol must be positive");
    const auto& grid = prop.grid();
    noises_.reserve(prop.steps());
    for (int i = 0; i < prop.steps(); ++i) {
        const double h = grid[i + 1] - grid[i];
        const double mid = 0.5 * (grid[i] + grid[i + 1]);
        const Eigen::MatrixXd a = assemble_operator(prop.coefficients(), mid, prop.basis());
        const Eigen::MatrixXd gm =
            galerkin_multiplication(prop.coefficients().g, mid, prop.basis());
        noises_.push_back(frozen_step(a, gm * gm.transpose(), h).noise);
    }
}

Gramian Engine::gramian_by_index(int i, int j) const {
    const int n = prop_->dim();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (int k = i; k < j; ++k) {
        if (k > i) {
            const Eigen::MatrixXd& e = prop_->substep_flow(k);
            q = e * q * e.transpose();
        }
        q += noises_[k];
    }
    q = 0.5 * (q + q.transpose());
    Gramian gram;
    gram.s = prop_->grid()[i];
    gram.t = prop_->grid()[j];
    gram.quad_nodes.assign(prop_->grid().begin() + i, prop_->grid().begin() + j + 1);
    gram.state = gaussian::GaussianState::from_covariance(q, pinv_tol_);
    return gram;
}

Gramian Engine::gramian(double s, double t) const {
    if (s > t) throw ArgumentError("gramian: requires s <= t");
    const int i = prop_->snap(s);
    const int j = prop_->snap(t);
    if (i == j && t - s > 1e-12 * std::max(1.0, prop_->horizon()))
        throw NumericalError(tags::degenerate_window,
                             "window t-s = " + format_double(t - s) +
                                 " is below the grid resolution");
    return gramian_by_index(std::min(i, j), std::max(i, j));
}

SigmaMap Engine::sigma_map(double s, double t) const { return sigma_map(gramian(s, t)); }

SigmaMap Engine::sigma_map(const Gramian& gram) const {
    const Eigen::MatrixXd flow = (*prop_)(gram.s, gram.t);
    SigmaMap sm;
    sm.s = gram.s;
    sm.t = gram.t;
    const auto& state = gram.state;
    // Columns of S(t,s) must lie in range(Q_{t,s}); otherwise Assumption 2
    // fails in the truncation.
    const Eigen::MatrixXd proj = state.range_basis() * state.range_basis().transpose();
    for (int c = 0; c < flow.cols(); ++c) {
        const double res = (flow.col(c) - proj * flow.col(c)).norm();
        if (res > pinv_tol_ * flow.col(c).norm())
            throw NumericalError(tags::null_controllability,
                                 "column " + std::to_string(c + 1) +
                                     " of S(t,s) is outside range(Q_{t,s})");
    }
    sm.sigma = state.factor_pinv() * flow;
    sm.op_norm = spectral_norm(sm.sigma);
    return sm;
}

double Engine::embedding_norm(double s, double r, double t) const {
    if (!(s < r && r < t)) throw ArgumentError("embedding_norm: requires s < r < t");
    const Gramian inner = gramian(s, r);
    const Gramian outer = gramian(s, t);
    const int n = prop_->dim();
    if (inner.state.rank() < n)
        throw NumericalError(tags::rank_deficient, "Q_{r,s} is rank deficient");
    if (outer.state.rank() < n)
        throw NumericalError(tags::rank_deficient, "Q_{t,s} is rank deficient");
    const Eigen::MatrixXd str = (*prop_)(r, t);
    return spectral_norm(outer.state.factor_pinv() * str * inner.state.factor());
}

Kernel Engine::make_kernel(double s, double t, Eigen::MatrixXd flow,
                           gaussian::GaussianState state) const {
    Kernel k;
    k.s = s;
    k.t = t;
    k.flow = std::move(flow);
    k.state = std::move(state);
    if (k.state.rank() > 0) {
        const Eigen::MatrixXd proj = k.state.range_basis() * k.state.range_basis().transpose();
        for (int c = 0; c < k.flow.cols(); ++c) {
            const double res = (k.flow.col(c) - proj * k.flow.col(c)).norm();
            if (res > pinv_tol_ * k.flow.col(c).norm())
                throw NumericalError(tags::null_controllability,
                                     "column " + std::to_string(c + 1) +
                                         " of S(t,s) is outside range(Q_{t,s})");
        }
        k.sigma = k.state.factor_pinv() * k.flow;
        k.sigma_norm = spectral_norm(k.sigma);
    } else {
        k.sigma = Eigen::MatrixXd::Zero(0, k.flow.cols());
        k.sigma_norm = 0.0;
    }
    return k;
}

Kernel Engine::kernel(double s, double t) const {
    Gramian gram = gramian(s, t);
    if (gram.s == gram.t) {
        // Zero window: point mass, S = I.
        Kernel k;
        k.s = gram.s;
        k.t = gram.t;
        k.flow = Eigen::MatrixXd::Identity(prop_->dim(), prop_->dim());
        k.state = std::move(gram.state);
        k.sigma = Eigen::MatrixXd::Zero(0, prop_->dim());
        k.sigma_norm = 0.0;
        return k;
    }
    Eigen::MatrixXd flow = (*prop_)(gram.s, gram.t);
    return make_kernel(gram.s, gram.t, std::move(flow), std::move(gram.state));
}

Kernel Engine::kernel_from_index(int i, double t_end) const {
    const auto& grid = prop_->grid();
    if (i < 0 || i > prop_->steps()) throw ArgumentError("kernel_from_index: bad index");
    const double s = grid[i];
    if (t_end < s) throw ArgumentError("kernel_from_index: t_end before start");
    if (t_end == s) return kernel(s, s);

    const double h = prop_->horizon() / prop_->steps();
    int j = std::clamp(static_cast<int>(std::floor(t_end / h + 1e-9)), i, prop_->steps());

    const int n = prop_->dim();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd flow = Eigen::MatrixXd::Identity(n, n);
    for (int k = i; k < j; ++k) {
        const Eigen::MatrixXd& e = prop_->substep_flow(k);
        q = e * q * e.transpose() + noises_[k];
        flow = e * flow;
    }
    if (t_end > grid[j]) {
        const double mid = 0.5 * (grid[j] + t_end);
        const Eigen::MatrixXd a = assemble_operator(prop_->coefficients(), mid, prop_->basis());
        const Eigen::MatrixXd gm =
            galerkin_multiplication(prop_->coefficients().g, mid, prop_->basis());
        const CellStep frag = frozen_step(a, gm * gm.transpose(), t_end - grid[j]);
        q = frag.flow * q * frag.flow.transpose() + frag.noise;
        flow = frag.flow * flow;
    }
    q = 0.5 * (q + q.transpose());
    return make_kernel(s, t_end, std::move(flow),
                       gaussian::GaussianState::from_covariance(q, pinv_tol_));
}

double Engine::apply(double s, double t, const gaussian::StateFn& f, const Eigen::VectorXd& x,
                     const gaussian::Cubature& cub) const {
    const Kernel k = kernel(s, t);
    const gaussian::CubatureRule rule = gaussian::make_rule(cub, k.state.rank());
    return gaussian::smooth_convolve(k.state, f, k.flow * x, rule);
}

Eigen::VectorXd Engine::gradient(double s, double t, const gaussian::StateFn& f,
                                 const Eigen::VectorXd& x,
                                 const gaussian::Cubature& cub) const {
    const Kernel k = kernel(s, t);
    if (k.state.rank() == 0)
        throw NumericalError(tags::null_controllability,
                             "zero window: the transition kernel has no smoothing");
    const gaussian::CubatureRule rule = gaussian::make_rule(cub, k.state.rank());
    const Eigen::VectorXd moment = gaussian::smooth_gradient(k.state, f, k.flow * x, rule);
    return k.sigma.transpose() * moment;
}

Eigen::MatrixXd Engine::hessian(double s, double t, const gaussian::StateFn& f,
                                const Eigen::VectorXd& x,
                                const gaussian::Cubature& cub) const {
    const Kernel k = kernel(s, t);
    if (k.state.rank() == 0)
        throw NumericalError(tags::null_controllability,
                             "zero window: the transition kernel has no smoothing");
    const gaussian::CubatureRule rule = gaussian::make_rule(cub, k.state.rank());
    const Eigen::MatrixXd h = gaussian::smooth_hessian(k.state, f, k.flow * x, rule);
    return k.sigma.transpose() * h * k.sigma;
}

AlphaFit Engine::alpha_fit(const std::vector<std::pair<double, double>>& pairs) const {
    if (pairs.size() < 6) throw ArgumentError("alpha_fit: need at least 6 (s,t) pairs");
    double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0;
    for (const auto& [s, t] : pairs) {
        if (!(t > s)) throw ArgumentError("alpha_fit: pairs need s < t");
        gmin = std::min(gmin, t - s);
        gmax = std::max(gmax, t - s);
    }
    if (gmax / gmin < std::pow(10.0, 1.5) * (1.0 - 1e-9))
        throw NumericalError(tags::fit_span,
                             "pairs span " + format_double(std::log10(gmax / gmin)) +
                                 " decades of t-s; need at least 1.5");
    AlphaFit fit;
    for (const auto& [s, t] : pairs) {
        fit.gaps.push_back(t - s);
        fit.norms.push_back(sigma_map(s, t).op_norm);
    }
    const LogLogFit ls = fit_loglog(fit.gaps, fit.norms);
    fit.alpha_hat = -ls.slope;
    fit.constant = std::exp(ls.intercept);
    fit.residual = ls.residual;
    return fit;
}

AlphaFit alpha_probe(const evolution::CoefficientField& coeffs,
                     const evolution::SpectralBasis& basis, double pinv_tol) {
    // Window capped at 1/(8 lambda_1) so mode one is still in its
    // power-law regime; 48 steps host the 1.5-decade ladder.
    const double lam1 = basis.eigenvalues(0);
    const double h = std::min(0.125 / lam1, coeffs.horizon * (2.0 / 3.0)) / 32.0;
    evolution::CoefficientField window = coeffs;
    window.horizon = 48.0 * h;
    evolution::Propagator prop(window, basis, 48, 1);
    Engine engine(prop, pinv_tol);
    return engine.alpha_fit(evolution::fit_pairs_on_grid(prop));
}

}  // namespace mildhjb::ou
