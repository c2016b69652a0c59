#include "mildhjb/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "mildhjb/numerics.hpp"

namespace mildhjb::hjb {

Hamiltonian Hamiltonian::zero(int dim) {
    (void)dim;
    Hamiltonian h;
    h.kind = Kind::zero;
    h.lipschitz_c = 0.0;
    h.eval = [](double, const Eigen::VectorXd&, const Eigen::VectorXd&) { return 0.0; };
    return h;
}

Hamiltonian Hamiltonian::finite_control(std::vector<Control> controls) {
    if (controls.empty())
        throw ArgumentError("finite_control: need at least one control");
    const Eigen::Index dim = controls.front().drift.size();
    double c = 0.0;
    for (const Control& u : controls) {
        if (u.drift.size() != dim)
            throw ArgumentError("finite_control: control drifts must share a dimension");
        c = std::max(c, u.drift.norm());
    }
    Hamiltonian h;
    h.kind = Kind::finite_control;
    h.lipschitz_c = c;
    h.controls = std::move(controls);
    auto table = h.controls;  // owned copy for the closure
    h.eval = [table](double, const Eigen::VectorXd&, const Eigen::VectorXd& p) {
        double best = table.front().drift.dot(p) + table.front().cost;
        for (std::size_t i = 1; i < table.size(); ++i) {
            const double cand = table[i].drift.dot(p) + table[i].cost;
            if (cand < best) best = cand;
        }
        return best;
    };
    return h;
}

Lattice::Lattice(int dim, int points_per_dim, double half_width)
    : dim_(dim), points_(points_per_dim), half_width_(half_width) {
    if (dim < 1 || dim > 8) throw ArgumentError("lattice: dimension must lie in 1..8");
    if (points_per_dim < 2) throw ArgumentError("lattice: need at least 2 points per dim");
    if (!(half_width > 0.0)) throw ArgumentError("lattice: half width must be positive");
    step_ = 2.0 * half_width_ / (points_ - 1);
    count_ = 1;
    strides_.resize(dim_);
    for (int d = 0; d < dim_; ++d) {
        strides_[d] = count_;
        count_ *= points_;
        if (count_ > (1L << 26))
            throw ArgumentError("lattice: node count exceeds the memory budget");
    }
}

Eigen::VectorXd Lattice::node(long index) const {
    Eigen::VectorXd x(dim_);
    for (int d = 0; d < dim_; ++d) {
        const long i = (index / strides_[d]) % points_;
        x(d) = -half_width_ + i * step_;
    }
    return x;
}

namespace {

// Per-dimension cell location with boundary clamping.
struct CellPos {
    long base = 0;
    double frac[8];
    long stride[8];
    int dim = 0;
    bool clamped = false;
};

inline CellPos locate(const Lattice& lat, const std::vector<long>& strides,
                      const Eigen::VectorXd& x) {
    CellPos pos;
    pos.dim = static_cast<int>(x.size());
    for (int d = 0; d < pos.dim; ++d) {
        double u = (x(d) + lat.half_width()) / lat.step();
        if (u < 0.0) {
            u = 0.0;
            pos.clamped = true;
        }
        const double umax = static_cast<double>(lat.points_per_dim() - 1);
        if (u > umax) {
            u = umax;
            pos.clamped = true;
        }
        long i0 = static_cast<long>(u);
        if (i0 > lat.points_per_dim() - 2) i0 = lat.points_per_dim() - 2;
        pos.base += i0 * strides[d];
        pos.frac[d] = u - static_cast<double>(i0);
        pos.stride[d] = strides[d];
    }
    return pos;
}

}  // namespace

Eigen::VectorXd Lattice::interpolate_rows(const Eigen::MatrixXd& fields,
                                          const Eigen::VectorXd& x, long* clamped) const {
    if (fields.rows() != count_) throw ArgumentError("lattice: field size mismatch");
    if (x.size() != dim_) throw ArgumentError("lattice: point dimension mismatch");
    const CellPos pos = locate(*this, strides_, x);
    if (pos.clamped && clamped) ++(*clamped);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(fields.cols());
    const int corners = 1 << dim_;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        long idx = pos.base;
        for (int d = 0; d < dim_; ++d) {
            if (c & (1 << d)) {
                w *= pos.frac[d];
                idx += pos.stride[d];
            } else {
                w *= 1.0 - pos.frac[d];
            }
        }
        out.noalias() += w * fields.row(idx).transpose();
    }
    return out;
}

double ValueIterate::sup_value() const {
    double s = 0.0;
    for (const auto& v : values) s = std::max(s, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    return s;
}

double ValueIterate::sup_weighted_gradient() const {
    const double horizon_t = horizon();
    double s = 0.0;
    for (std::size_t i = 0; i < gradients.size(); ++i) {
        const double w = std::pow(horizon_t - time_grid[i], alpha);
        if (gradients[i].rows() == 0) continue;
        s = std::max(s, w * gradients[i].rowwise().norm().maxCoeff());
    }
    return s;
}

double weighted_distance(const ValueIterate& a, const ValueIterate& b, double beta) {
    if (a.time_grid != b.time_grid || !(a.lattice == b.lattice) || a.alpha != b.alpha)
        throw ArgumentError("weighted_distance: iterates live on different grids");
    const double horizon_t = a.horizon();
    double dist = 0.0;
    for (std::size_t i = 0; i < a.time_grid.size(); ++i) {
        const double gap = horizon_t - a.time_grid[i];
        const double dv = (a.values[i] - b.values[i]).cwiseAbs().maxCoeff();
        const double dg = (a.gradients[i] - b.gradients[i]).rowwise().norm().maxCoeff();
        const double slice = std::exp(-beta * gap) * (dv + std::pow(gap, a.alpha) * dg);
        dist = std::max(dist, slice);
    }
    return dist;
}

TimeRule graded_time_rule(double t, double horizon, double alpha, int m) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("graded_time_rule: alpha in (0,1)");
    if (m < 1) throw ArgumentError("graded_time_rule: need at least one cell");
    TimeRule rule;
    const double gap = horizon - t;
    if (gap <= 0.0) return rule;
    const double p = 1.0 / (1.0 - alpha);
    const double gap_pow = std::pow(gap, 1.0 - alpha);
    double prev = t;
    for (int j = 1; j <= m; ++j) {
        const double b = t + gap * std::pow(static_cast<double>(j) / m, p);
        const double w = b - prev;
        // In-cell node making w * (s-t)^{-alpha} match the exact cell
        // integral of (s-t)^{-alpha}; with this grading the cell integrals
        // are all gap^{1-alpha} / (m (1-alpha)).
        const double s = t + std::pow(m * (1.0 - alpha) * w / gap_pow, 1.0 / alpha);
        rule.nodes.push_back(std::min(s, horizon));
        rule.weights.push_back(w);
        prev = b;
    }
    return rule;
}

namespace {

struct KernelSet {
    ou::Kernel terminal;
    Eigen::MatrixXd terminal_offsets;  // dim x cubature points
    const gaussian::CubatureRule* terminal_rule = nullptr;
    std::vector<ou::Kernel> integral;
    std::vector<Eigen::MatrixXd> integral_offsets;
    std::vector<const gaussian::CubatureRule*> integral_rules;
    std::vector<double> time_weights;
    std::vector<int> bracket_lo;     // time-interp slice per node
    std::vector<double> bracket_th;  // time-interp weight per node
};

int resolve_threads(int threads, long count) {
    int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    return static_cast<int>(std::min<long>(n, count));
}

void run_parallel(long count, int threads, const std::function<void(long, long, int)>& body) {
    const int n = resolve_threads(threads, count);
    if (n <= 1) {
        body(0, count, 0);
        return;
    }
    std::vector<std::thread> pool;
    const long chunk = (count + n - 1) / n;
    for (int w = 0; w < n; ++w) {
        const long lo = w * chunk;
        const long hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi, w] { body(lo, hi, w); });
    }
    for (auto& th : pool) th.join();
}

GammaResult sweep(const std::vector<double>& time_grid, const Lattice& lattice, double alpha,
                  const ValueIterate* source, const Hamiltonian* ham, const Terminal& terminal,
                  const ou::Engine& engine, const gaussian::Cubature& cub, int time_nodes,
                  int threads) {
    const auto& prop = engine.propagator();
    const double horizon_t = prop.horizon();
    const int dim = prop.dim();
    if (time_grid.empty() || time_grid.back() != horizon_t)
        throw ArgumentError("sweep: time grid must end at the horizon");

    std::vector<int> slice_index(time_grid.size());
    for (std::size_t i = 0; i < time_grid.size(); ++i) {
        bool off = false;
        slice_index[i] = prop.snap(time_grid[i], &off);
        if (off) throw ArgumentError("sweep: time grid must align with the propagator grid");
    }

    const bool with_integral = ham != nullptr && ham->kind != Hamiltonian::Kind::zero;
    if (with_integral && source == nullptr)
        throw ArgumentError("sweep: nonzero Hamiltonian needs a source iterate");

    const std::size_t slices = time_grid.size();
    GammaResult result{ValueIterate{time_grid, lattice, {}, {}, alpha}, 0};
    result.iterate.values.assign(slices, Eigen::VectorXd::Zero(lattice.node_count()));
    result.iterate.gradients.assign(slices,
                                    Eigen::MatrixXd::Zero(lattice.node_count(), dim));

    // Terminal slice is stored exactly.
    {
        Eigen::VectorXd& vals = result.iterate.values[slices - 1];
        Eigen::MatrixXd& grads = result.iterate.gradients[slices - 1];
        for (long nidx = 0; nidx < lattice.node_count(); ++nidx) {
            const Eigen::VectorXd x = lattice.node(nidx);
            vals(nidx) = terminal.value(x);
            grads.row(nidx) = terminal.grad(x).transpose();
        }
    }

    // Cubature rules per Gramian rank, built once.
    std::vector<gaussian::CubatureRule> rules_by_rank(dim + 1);
    std::vector<bool> have_rule(dim + 1, false);
    auto rule_for = [&](int rank) -> const gaussian::CubatureRule& {
        if (!have_rule[rank]) {
            rules_by_rank[rank] = gaussian::make_rule(cub, rank);
            have_rule[rank] = true;
        }
        return rules_by_rank[rank];
    };

    const double dt = slices > 1 ? time_grid[1] - time_grid[0] : 0.0;

    for (std::size_t i = 0; i + 1 < slices; ++i) {
        const double t = time_grid[i];
        KernelSet ks;
        ks.terminal = engine.kernel_from_index(slice_index[i], horizon_t);
        ks.terminal_rule = &rule_for(ks.terminal.state.rank());
        ks.terminal_offsets = ks.terminal.state.factor() * ks.terminal_rule->nodes;

        if (with_integral) {
            const TimeRule tr = graded_time_rule(t, horizon_t, alpha, time_nodes);
            for (std::size_t j = 0; j < tr.nodes.size(); ++j) {
                ou::Kernel k = engine.kernel_from_index(slice_index[i], tr.nodes[j]);
                ks.integral_rules.push_back(&rule_for(k.state.rank()));
                ks.integral_offsets.push_back(k.state.factor() *
                                              ks.integral_rules.back()->nodes);
                ks.integral.push_back(std::move(k));
                ks.time_weights.push_back(tr.weights[j]);
                int lo = static_cast<int>(std::floor(tr.nodes[j] / dt));
                lo = std::clamp(lo, 0, static_cast<int>(slices) - 2);
                ks.bracket_lo.push_back(lo);
                ks.bracket_th.push_back(
                    std::clamp((tr.nodes[j] - time_grid[lo]) / dt, 0.0, 1.0));
            }
        }

        Eigen::VectorXd& vals = result.iterate.values[i];
        Eigen::MatrixXd& grads = result.iterate.gradients[i];
        std::vector<long> clamp_counts(
            std::max(resolve_threads(threads, lattice.node_count()), 1), 0);

        auto body = [&](long lo, long hi, int worker) {
            long clamps = 0;
            Eigen::VectorXd x(dim), base(dim), xk(dim), pvec(dim);
            for (long nidx = lo; nidx < hi; ++nidx) {
                x = lattice.node(nidx);

                // P(t,T) phi term.
                const auto& trule = *ks.terminal_rule;
                base.noalias() = ks.terminal.flow * x;
                double value = 0.0;
                Eigen::VectorXd mom = Eigen::VectorXd::Zero(ks.terminal.state.rank());
                for (Eigen::Index k = 0; k < trule.weights.size(); ++k) {
                    xk = base + ks.terminal_offsets.col(k);
                    const double wf = trule.weights(k) * terminal.value(xk);
                    value += wf;
                    mom.noalias() += wf * trule.nodes.col(k);
                }
                Eigen::VectorXd grad = ks.terminal.sigma.transpose() * mom;

                // Time integral of P(t,s) H(s, ., D_x v(s, .)).
                for (std::size_t j = 0; j < ks.integral.size(); ++j) {
                    const ou::Kernel& kj = ks.integral[j];
                    const auto& rule = *ks.integral_rules[j];
                    const int lo_slice = ks.bracket_lo[j];
                    const double th = ks.bracket_th[j];
                    const double s = kj.t;
                    base.noalias() = kj.flow * x;
                    double hval = 0.0;
                    Eigen::VectorXd hmom = Eigen::VectorXd::Zero(kj.state.rank());
                    for (Eigen::Index k = 0; k < rule.weights.size(); ++k) {
                        xk = base + ks.integral_offsets[j].col(k);
                        pvec = (1.0 - th) * lattice.interpolate_rows(
                                                source->gradients[lo_slice], xk, &clamps) +
                               th * lattice.interpolate_rows(
                                        source->gradients[lo_slice + 1], xk, nullptr);
                        const double wf = rule.weights(k) * ham->eval(s, xk, pvec);
                        hval += wf;
                        hmom.noalias() += wf * rule.nodes.col(k);
                    }
                    value += ks.time_weights[j] * hval;
                    grad.noalias() += ks.time_weights[j] * (kj.sigma.transpose() * hmom);
                }

                vals(nidx) = value;
                grads.row(nidx) = grad.transpose();
            }
            clamp_counts[worker] += clamps;
        };
        run_parallel(lattice.node_count(), threads, body);
        for (long c : clamp_counts) result.clamp_count += c;
    }
    return result;
}

}  // namespace

GammaResult gamma_map(const ValueIterate& v, const Hamiltonian& ham, const Terminal& terminal,
                      const ou::Engine& engine, const gaussian::Cubature& cub, int time_nodes,
                      int threads) {
    return sweep(v.time_grid, v.lattice, v.alpha, &v, &ham, terminal, engine, cub, time_nodes,
                 threads);
}

GammaResult initial_iterate(const std::vector<double>& time_grid, const Lattice& lattice,
                            double alpha, const Terminal& terminal, const ou::Engine& engine,
                            const gaussian::Cubature& cub, int threads) {
    return sweep(time_grid, lattice, alpha, nullptr, nullptr, terminal, engine, cub, 1,
                 threads);
}

double contraction_probe(const ValueIterate& v1, const ValueIterate& v2,
                         const Hamiltonian& ham, const Terminal& terminal,
                         const ou::Engine& engine, const gaussian::Cubature& cub,
                         int time_nodes, double beta, int threads) {
    const double denom = weighted_distance(v1, v2, beta);
    if (denom == 0.0) throw ArgumentError("contraction_probe: iterates coincide");
    const GammaResult g1 = gamma_map(v1, ham, terminal, engine, cub, time_nodes, threads);
    const GammaResult g2 = gamma_map(v2, ham, terminal, engine, cub, time_nodes, threads);
    return weighted_distance(g1.iterate, g2.iterate, beta) / denom;
}

double step1_weight_supremum(double eps, double beta, double alpha, double horizon) {
    const double drop = beta * (1.0 - eps);
    const double tau_bar = (1.0 - alpha) / drop;
    const double tau = std::min(tau_bar, horizon);
    return std::pow(eps * tau, 1.0 - alpha) * std::exp(-drop * tau);
}

Schedule schedule_beta(double lipschitz_c, double alpha, double horizon) {
    if (!(lipschitz_c > 0.0)) throw ArgumentError("schedule_beta: C must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("schedule_beta: alpha in (0,1)");
    if (!(horizon > 0.0)) throw ArgumentError("schedule_beta: horizon must be positive");
    const double c = lipschitz_c;
    const double one_m_a = 1.0 - alpha;
    const double t_pow = std::pow(horizon, one_m_a);

    Schedule s;
    // Step 1 static condition: C T^{1-a} (1 - eps^{1-a}) / (1-a) < 1/5.
    {
        const double full = c * t_pow / one_m_a;
        if (full < 0.2) {
            s.eps1 = 0.0;
        } else {
            s.eps1 = std::pow(1.0 - one_m_a / (5.0 * c * t_pow), 1.0 / one_m_a);
        }
    }
    // Step 2 static condition: C^2 eps^{-a} [T (1-eps)]^{1-a} / (1-a) < 1/5,
    // decreasing in eps; bisect for the smallest admissible value.
    {
        auto f = [&](double e) {
            return c * c * std::pow(e, -alpha) * std::pow(horizon * (1.0 - e), one_m_a) /
                       one_m_a -
                   0.2;
        };
        double lo = 1e-12, hi = 1.0 - 1e-12;
        if (f(hi) > 0.0) {
            s.eps2 = hi;
        } else if (f(lo) < 0.0) {
            s.eps2 = lo;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (f(mid) > 0.0 ? lo : hi) = mid;
            }
            s.eps2 = hi;
        }
    }
    const double base = std::max(s.eps1, s.eps2);
    s.epsilon = base + 0.05 * (1.0 - base);

    const double eps = s.epsilon;
    const double head = eps * one_m_a / (std::numbers::e * (1.0 - eps));
    s.beta1 = head * std::pow(5.0 * c / one_m_a, 1.0 / one_m_a);
    s.beta2 = head * std::pow(5.0 * c * c * std::pow(1.0 - eps, -alpha) / one_m_a,
                              1.0 / one_m_a);
    const double validity = one_m_a / (horizon * (1.0 - eps));
    s.beta = std::max({s.beta1, s.beta2, validity}) * (1.0 + 1e-6);

    s.step1_static = c * t_pow * (1.0 - std::pow(eps, one_m_a)) / one_m_a;
    s.step2_static = c * c * std::pow(eps, -alpha) * std::pow(horizon * (1.0 - eps), one_m_a) /
                     one_m_a;
    const double sup = step1_weight_supremum(eps, s.beta, alpha, horizon);
    s.step1_dynamic = c / one_m_a * sup;
    s.step2_dynamic = c * c * std::pow(1.0 - eps, -alpha) / one_m_a * sup;
    return s;
}

PicardResult picard_solve(const Terminal& terminal, const Hamiltonian& ham,
                          const ou::Engine& engine, const PicardConfig& config) {
    const auto& prop = engine.propagator();
    const double horizon_t = prop.horizon();
    const int dim = prop.dim();
    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw ArgumentError("picard_solve: alpha must lie in (0,1)");

    // Probe the declared Lipschitz constant on sampled (t, x, p, q).
    if (ham.kind != Hamiltonian::Kind::zero) {
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> uni(-3.0, 3.0);
        std::uniform_real_distribution<double> ut(0.0, horizon_t);
        for (int probe = 0; probe < 64; ++probe) {
            const double tt = ut(rng);
            Eigen::VectorXd x(dim), p(dim), q(dim);
            for (int d = 0; d < dim; ++d) {
                x(d) = uni(rng);
                p(d) = uni(rng);
                q(d) = uni(rng);
            }
            const double lhs = std::abs(ham.eval(tt, x, p) - ham.eval(tt, x, q));
            const double rhs = ham.lipschitz_c * (p - q).norm();
            if (lhs > rhs * (1.0 + 1e-6) + 1e-9)
                throw ArgumentError(
                    "picard_solve: Hamiltonian violates its declared Lipschitz constant");
        }
    }

    double half_width = config.lattice_half_width;
    if (half_width <= 0.0) {
        const ou::Gramian full = engine.gramian(0.0, horizon_t);
        half_width = 3.0 * std::sqrt(full.state.covariance().diagonal().maxCoeff());
    }
    const Lattice lattice(dim, config.lattice_points, half_width);

    std::vector<double> time_grid;
    for (int i = 0; i <= prop.time_cells(); ++i)
        time_grid.push_back(prop.grid()[static_cast<std::size_t>(i) *
                                        prop.substeps_per_cell()]);

    SolveReport report;
    report.alpha = config.alpha;
    report.tolerance = config.tolerance;
    report.lipschitz_c = ham.lipschitz_c;
    if (ham.kind != Hamiltonian::Kind::zero && ham.lipschitz_c > 0.0) {
        const Schedule sched = schedule_beta(ham.lipschitz_c, config.alpha, horizon_t);
        report.epsilon = sched.epsilon;
        report.eps1 = sched.eps1;
        report.eps2 = sched.eps2;
        report.beta_proof = sched.beta;
        // The proof's beta is safe but can be astronomically large; cap the
        // reporting/stopping weight so e^{-beta(T-t)} stays resolvable.
        report.beta = std::min(sched.beta, 24.0 / horizon_t);
    }

    GammaResult current = initial_iterate(time_grid, lattice, config.alpha, terminal, engine,
                                          config.cubature, config.threads);
    report.clamp_count += current.clamp_count;

    int expansive_streak = 0;
    for (int k = 1; k <= config.max_iterations; ++k) {
        GammaResult next = gamma_map(current.iterate, ham, terminal, engine, config.cubature,
                                     config.time_nodes, config.threads);
        report.clamp_count += next.clamp_count;
        const double rb = weighted_distance(next.iterate, current.iterate, report.beta);
        const double rs = weighted_distance(next.iterate, current.iterate, 0.0);
        if (!report.residuals_beta.empty()) {
            const double prev = report.residuals_beta.back();
            report.ratios.push_back(prev > 0.0 ? rb / prev : 0.0);
            if (report.ratios.back() > 1.0) {
                if (++expansive_streak >= 3) {
                    report.iterations = k;
                    throw NonContractionError(
                        "picard_solve: expansive over three consecutive iterations", report);
                }
            } else {
                expansive_streak = 0;
            }
        }
        report.residuals_beta.push_back(rb);
        report.residuals_sup.push_back(rs);
        report.iterations = k;
        current = std::move(next);
        if (rs < config.tolerance) {
            report.converged = true;
            break;
        }
    }
    return PicardResult{std::move(current.iterate), std::move(report)};
}

}  // namespace mildhjb::hjb
