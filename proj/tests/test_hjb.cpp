#include "mildhjb/hjb.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "mildhjb/errors.hpp"
#include "mildhjb/numerics.hpp"
#include "oracles.hpp"

using namespace mildhjb;
using namespace mildhjb::evolution;
using namespace mildhjb::hjb;

namespace {

struct World {
    CoefficientField coeffs;
    SpectralBasis basis;
    Propagator prop;
    ou::Engine engine;

    World(const std::string& builtin, int modes, int cells, int substeps, double horizon = 1.0,
          std::map<std::string, double> params = {})
        : coeffs(CoefficientField::builtin(builtin, params, horizon)),
          basis(modes),
          prop(coeffs, basis, cells, substeps),
          engine(prop) {}

    std::vector<double> major_grid() const {
        std::vector<double> grid;
        for (int i = 0; i <= prop.time_cells(); ++i)
            grid.push_back(prop.grid()[static_cast<std::size_t>(i) * prop.substeps_per_cell()]);
        return grid;
    }
};

Terminal cosine_terminal(const Eigen::VectorXd& u) {
    Terminal t;
    t.value = [u](const Eigen::VectorXd& x) { return std::cos(u.dot(x)); };
    t.grad = [u](const Eigen::VectorXd& x) {
        return Eigen::VectorXd(-std::sin(u.dot(x)) * u);
    };
    t.sup_norm = 1.0;
    return t;
}

Terminal constant_terminal(int dim, double c) {
    Terminal t;
    t.value = [c](const Eigen::VectorXd&) { return c; };
    t.grad = [dim](const Eigen::VectorXd&) { return Eigen::VectorXd(Eigen::VectorXd::Zero(dim)); };
    t.sup_norm = std::abs(c);
    return t;
}

// Smooth deterministic perturbation of an iterate, consistent between the
// stored values and gradients, nonzero at every slice including t = T.
ValueIterate perturb(const ValueIterate& v, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    ValueIterate out = v;
    const int dim = v.lattice.dim();
    for (std::size_t i = 0; i < v.time_grid.size(); ++i) {
        Eigen::VectorXd k(dim);
        for (int d = 0; d < dim; ++d) k(d) = 2.0 * uni(rng);
        const double amp = 0.3 + 0.2 * uni(rng);
        const double phase = uni(rng);
        for (long n = 0; n < v.lattice.node_count(); ++n) {
            const Eigen::VectorXd x = v.lattice.node(n);
            out.values[i](n) += amp * std::cos(k.dot(x) + phase);
            out.gradients[i].row(n) -=
                (amp * std::sin(k.dot(x) + phase)) * k.transpose();
        }
    }
    return out;
}

gaussian::Cubature gh_cub(int nodes = 9) {
    gaussian::Cubature cub;
    cub.nodes_per_dim = nodes;
    return cub;
}

}  // namespace

TEST_CASE("weighted distance: zero, beta = 0 reduction, constant offsets") {
    World w("constant", 2, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::Vector2d(1.0, 0.5));
    const Lattice lat(2, 5, 1.0);
    const GammaResult base =
        initial_iterate(w.major_grid(), lat, 0.5, phi, w.engine, gh_cub(5), 1);

    CHECK(weighted_distance(base.iterate, base.iterate, 3.0) == 0.0);

    ValueIterate shifted = base.iterate;
    for (auto& vals : shifted.values) vals.array() += 0.75;
    CHECK(weighted_distance(base.iterate, shifted, 0.0) == doctest::Approx(0.75));
    CHECK(weighted_distance(base.iterate, shifted, 4.0) == doctest::Approx(0.75));

    ValueIterate other = base.iterate;
    other.alpha = 0.6;
    CHECK_THROWS_AS(weighted_distance(base.iterate, other, 1.0), ArgumentError);
}

TEST_CASE("graded time rule integrates constants and the singular kernel exactly") {
    for (double alpha : {0.3, 0.5, 0.7}) {
        for (double t : {0.0, 0.4}) {
            const double horizon = 1.0;
            const TimeRule rule = graded_time_rule(t, horizon, alpha, 16);
            REQUIRE(rule.nodes.size() == 16);
            double sum_w = 0.0, sum_kernel = 0.0;
            for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
                CHECK(rule.nodes[j] > t);
                CHECK(rule.nodes[j] <= horizon);
                sum_w += rule.weights[j];
                sum_kernel += rule.weights[j] * std::pow(rule.nodes[j] - t, -alpha);
            }
            const double gap = horizon - t;
            CHECK(sum_w == doctest::Approx(gap).epsilon(1e-12));
            CHECK(sum_kernel ==
                  doctest::Approx(std::pow(gap, 1.0 - alpha) / (1.0 - alpha)).epsilon(1e-12));
        }
    }
    CHECK(graded_time_rule(1.0, 1.0, 0.5, 8).nodes.empty());
}

TEST_CASE("gamma with zero hamiltonian ignores the iterate entirely") {
    World w("lp_example", 2, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::Vector2d(1.0, -0.5));
    const Lattice lat(2, 7, 0.8);
    const auto grid = w.major_grid();
    const GammaResult v0 = initial_iterate(grid, lat, 0.5, phi, w.engine, gh_cub(7), 2);
    const Hamiltonian hz = Hamiltonian::zero(2);

    const GammaResult g1 = gamma_map(v0.iterate, hz, phi, w.engine, gh_cub(7), 12, 2);
    const GammaResult g2 =
        gamma_map(perturb(v0.iterate, 99), hz, phi, w.engine, gh_cub(7), 12, 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK((g1.iterate.values[i] - v0.iterate.values[i]).norm() == 0.0);
        CHECK((g2.iterate.values[i] - v0.iterate.values[i]).norm() == 0.0);
        CHECK((g1.iterate.gradients[i] - v0.iterate.gradients[i]).norm() == 0.0);
    }
}

TEST_CASE("constant terminal data and zero hamiltonian reproduce the constant") {
    World w("constant", 2, 8, 2);
    const Terminal phi = constant_terminal(2, 3.25);
    const Lattice lat(2, 5, 1.0);
    const GammaResult v0 =
        initial_iterate(w.major_grid(), lat, 0.5, phi, w.engine, gh_cub(5), 1);
    for (std::size_t i = 0; i < v0.iterate.values.size(); ++i) {
        CHECK((v0.iterate.values[i].array() - 3.25).abs().maxCoeff() <= 1e-13);
        CHECK(v0.iterate.gradients[i].cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("unit hamiltonian with zero terminal integrates to T - t") {
    World w("constant", 1, 8, 2);
    const Terminal phi = constant_terminal(1, 0.0);
    const Lattice lat(1, 9, 1.0);
    const auto grid = w.major_grid();
    const GammaResult v0 = initial_iterate(grid, lat, 0.5, phi, w.engine, gh_cub(7), 1);

    // One control with zero drift and unit cost: H(t,x,p) = 1 identically.
    Hamiltonian one = Hamiltonian::finite_control(
        {Control{Eigen::VectorXd::Zero(1), 1.0}});
    const GammaResult g = gamma_map(v0.iterate, one, phi, w.engine, gh_cub(7), 16, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double expected = grid.back() - grid[i];
        CHECK((g.iterate.values[i].array() - expected).abs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("schedule supremum formula matches a dense grid maximization") {
    for (double alpha : {0.4, 0.6}) {
        for (double eps : {0.5, 0.9}) {
            for (double beta : {8.0, 40.0}) {
                const double closed = step1_weight_supremum(eps, beta, alpha, 1.0);
                const double gridmax = oracles::grid_supremum_step1(eps, beta, alpha, 1.0);
                CHECK(closed == doctest::Approx(gridmax).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("schedule_beta bounds re-evaluate below one fifth") {
    for (double c : {0.3, 1.0, 2.0}) {
        for (double alpha : {0.4, 0.6}) {
            const Schedule s = schedule_beta(c, alpha, 1.0);
            CHECK(s.epsilon > 0.0);
            CHECK(s.epsilon < 1.0);
            CHECK(s.step1_static < 0.2);
            CHECK(s.step2_static < 0.2);
            CHECK(s.step1_dynamic < 0.2);
            CHECK(s.step2_dynamic < 0.2);
            // Dynamic pieces re-evaluated with the independent grid oracle.
            const double sup = oracles::grid_supremum_step1(s.epsilon, s.beta, alpha, 1.0);
            CHECK(c / (1.0 - alpha) * sup < 0.2);
            CHECK(c * c * std::pow(1.0 - s.epsilon, -alpha) / (1.0 - alpha) * sup < 0.2);
        }
    }
    // Tiny Lipschitz constants need only a minimal weight.
    CHECK(schedule_beta(1e-9, 0.5, 1.0).beta < schedule_beta(1.0, 0.5, 1.0).beta);
    CHECK(schedule_beta(1e-9, 0.5, 1.0).beta < 2.0);
    CHECK_THROWS_AS(schedule_beta(0.0, 0.5, 1.0), ArgumentError);
}

TEST_CASE("contraction probe: zero hamiltonian contracts to zero, beta sweep monotone") {
    World w("constant", 1, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::VectorXd::Constant(1, 2.0));
    const Lattice lat(1, 17, 0.8);
    const auto grid = w.major_grid();
    const GammaResult v0 = initial_iterate(grid, lat, 0.5, phi, w.engine, gh_cub(9), 2);
    const ValueIterate v1 = perturb(v0.iterate, 5);
    const ValueIterate v2 = perturb(v0.iterate, 6);

    const Hamiltonian hz = Hamiltonian::zero(1);
    CHECK(contraction_probe(v1, v2, hz, phi, w.engine, gh_cub(9), 12, 4.0, 2) == 0.0);

    Hamiltonian ham = Hamiltonian::finite_control(
        {Control{Eigen::VectorXd::Constant(1, 0.5), 0.0},
         Control{Eigen::VectorXd::Constant(1, -0.5), 0.1}});
    double prev = std::numeric_limits<double>::infinity();
    for (double beta : {2.0, 8.0, 24.0}) {
        const double ratio =
            contraction_probe(v1, v2, ham, phi, w.engine, gh_cub(9), 12, beta, 2);
        CHECK(ratio < prev);
        prev = ratio;
    }
    CHECK(prev < 0.85);

    CHECK_THROWS_AS(contraction_probe(v1, v1, ham, phi, w.engine, gh_cub(9), 12, 2.0, 2),
                    ArgumentError);
}

TEST_CASE("picard with zero hamiltonian converges in one exact correction") {
    World w("lp_example", 2, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::Vector2d(1.0, 0.3));
    PicardConfig pc;
    pc.alpha = 0.6;
    pc.cubature = gh_cub(7);
    pc.lattice_points = 7;
    pc.threads = 2;
    const PicardResult res = picard_solve(phi, Hamiltonian::zero(2), w.engine, pc);
    CHECK(res.report.converged);
    CHECK(res.report.iterations == 1);
    CHECK(res.report.residuals_sup.back() == 0.0);

    // Solution equals the terminal sweep to round-off.
    const GammaResult v0 = initial_iterate(res.solution.time_grid, res.solution.lattice,
                                           pc.alpha, phi, w.engine, pc.cubature, 2);
    for (std::size_t i = 0; i < res.solution.values.size(); ++i)
        CHECK((res.solution.values[i] - v0.iterate.values[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("monotone dependence on the terminal datum") {
    World w("constant", 1, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::VectorXd::Constant(1, 1.5));
    Terminal lifted = phi;
    const double c = 0.6;
    lifted.value = [phi, c](const Eigen::VectorXd& x) { return phi.value(x) + c; };

    PicardConfig pc;
    pc.alpha = 0.5;
    pc.cubature = gh_cub(7);
    pc.lattice_points = 9;
    pc.threads = 1;
    const PicardResult a = picard_solve(phi, Hamiltonian::zero(1), w.engine, pc);
    const PicardResult b = picard_solve(lifted, Hamiltonian::zero(1), w.engine, pc);
    for (std::size_t i = 0; i < a.solution.values.size(); ++i)
        CHECK((b.solution.values[i] - a.solution.values[i]).array().abs().maxCoeff() ==
              doctest::Approx(c).epsilon(1e-13));
}

TEST_CASE("picard iteration on a two-control problem") {
    World w("constant", 1, 16, 4);
    const Terminal phi = cosine_terminal(Eigen::VectorXd::Constant(1, 2.0));
    Hamiltonian ham = Hamiltonian::finite_control(
        {Control{Eigen::VectorXd::Constant(1, 0.9), 0.0},
         Control{Eigen::VectorXd::Constant(1, -0.9), 0.05}});

    PicardConfig pc;
    pc.alpha = 0.6;
    pc.cubature = gh_cub(9);
    pc.lattice_points = 41;
    pc.lattice_half_width = 1.0;
    pc.threads = 2;
    pc.time_nodes = 16;
    const PicardResult res = picard_solve(phi, ham, w.engine, pc);
    CHECK(res.report.converged);
    CHECK(res.report.beta <= 24.0 + 1e-9);
    CHECK(res.report.beta_proof >= res.report.beta);

    // Reported residual decay: nonincreasing after the second iteration and
    // geometric at 0.85.
    const auto& rb = res.report.residuals_beta;
    for (std::size_t k = 2; k < rb.size(); ++k) {
        CHECK(rb[k] <= rb[k - 1] * (1.0 + 1e-12));
        CHECK(rb[k] <= 0.85 * rb[k - 1]);
    }
    for (double r : res.report.ratios) CHECK(r <= 1.0);

    // Fixed point residual in the weighted norm.
    const GammaResult again =
        gamma_map(res.solution, ham, phi, w.engine, pc.cubature, pc.time_nodes, 2);
    CHECK(weighted_distance(again.iterate, res.solution, res.report.beta) <=
          3.0 * pc.tolerance);

    // Membership in the weighted space: no gradient blow-up across
    // iterations beyond ten times the first iterate's bound.
    const GammaResult first = initial_iterate(res.solution.time_grid, res.solution.lattice,
                                              pc.alpha, phi, w.engine, pc.cubature, 2);
    CHECK(res.solution.sup_weighted_gradient() <=
          10.0 * first.iterate.sup_weighted_gradient());

    // Stored gradients against centered differences of stored values.
    const auto& v = res.solution;
    const double dx = v.lattice.step();
    for (std::size_t i = 0; i + 1 < v.time_grid.size(); i += 4) {
        for (long n = 1; n + 1 < v.lattice.node_count(); ++n) {
            const double fd = (v.values[i](n + 1) - v.values[i](n - 1)) / (2.0 * dx);
            if (std::abs(fd) > 0.05)
                CHECK(v.gradients[i](n, 0) == doctest::Approx(fd).epsilon(5e-2));
        }
    }
}

TEST_CASE("picard matches a dense backward dynamic-programming oracle") {
    // One mode, two controls; the oracle walks a 10x finer time grid with
    // exact one-step kernels, Gauss-Hermite expectations and node-aligned
    // centered differences for the gradient argument.
    const int cells = 16;
    World w("constant", 1, cells, 4);
    const double lambda = w.basis.eigenvalues(0);
    const double horizon = 1.0;
    // Terminal datum constant outside the lattice box, so the clamped
    // interpolation semantics agree between the solver and the oracle.
    const double cap = 0.5;
    Terminal phi;
    phi.value = [cap](const Eigen::VectorXd& x) { return std::min(x.squaredNorm(), cap); };
    phi.grad = [cap](const Eigen::VectorXd& x) {
        return Eigen::VectorXd(x.squaredNorm() < cap ? (2.0 * x).eval()
                                                     : Eigen::VectorXd::Zero(x.size()).eval());
    };
    phi.sup_norm = cap;
    const std::vector<Control> controls = {Control{Eigen::VectorXd::Constant(1, 0.9), 0.0},
                                           Control{Eigen::VectorXd::Constant(1, -0.9), 0.05}};
    Hamiltonian ham = Hamiltonian::finite_control(controls);

    PicardConfig pc;
    pc.alpha = 0.6;
    pc.cubature = gh_cub(9);
    pc.lattice_points = 41;
    pc.lattice_half_width = 1.0;
    pc.threads = 2;
    pc.time_nodes = 16;
    const PicardResult res = picard_solve(phi, ham, w.engine, pc);
    REQUIRE(res.report.converged);

    // --- oracle ---
    const int fine = 10 * cells;
    const double dt = horizon / fine;
    const int points = pc.lattice_points;
    const double width = pc.lattice_half_width;
    const double dx = 2.0 * width / (points - 1);
    const QuadRule ghr = gauss_hermite(9);
    const double flow = oracles::heat_flow(lambda, dt);
    const double sigma = std::sqrt(oracles::heat_gramian(lambda, dt));

    auto interp = [&](const std::vector<double>& vals, double x) {
        double uu = (x + width) / dx;
        uu = std::clamp(uu, 0.0, static_cast<double>(points - 1));
        int i0 = std::min(static_cast<int>(uu), points - 2);
        const double frac = uu - i0;
        return (1.0 - frac) * vals[i0] + frac * vals[i0 + 1];
    };

    std::vector<std::vector<double>> value(fine + 1, std::vector<double>(points));
    for (int n = 0; n < points; ++n) {
        const double x0 = -width + n * dx;
        value[fine][n] = std::min(x0 * x0, cap);
    }
    for (int k = fine - 1; k >= 0; --k) {
        const double t = k * dt;
        const auto& next = value[k + 1];
        for (int n = 0; n < points; ++n) {
            const double x = -width + n * dx;
            double expectation = 0.0;
            for (std::size_t q = 0; q < ghr.nodes.size(); ++q)
                expectation += ghr.weights[q] * interp(next, flow * x + sigma * ghr.nodes[q]);
            double grad;
            if (n == 0)
                grad = (next[1] - next[0]) / dx;
            else if (n == points - 1)
                grad = (next[n] - next[n - 1]) / dx;
            else
                grad = (next[n + 1] - next[n - 1]) / (2.0 * dx);
            double hmin = std::numeric_limits<double>::infinity();
            for (const Control& ctrl : controls)
                hmin = std::min(hmin, ctrl.drift(0) * grad + ctrl.cost);
            (void)t;
            value[k][n] = expectation + dt * hmin;
        }
    }

    double worst = 0.0;
    for (std::size_t i = 0; i < res.solution.time_grid.size(); ++i) {
        const int k = static_cast<int>(std::lround(res.solution.time_grid[i] / dt));
        for (int n = 0; n < points; ++n)
            worst = std::max(worst, std::abs(res.solution.values[i](n) - value[k][n]));
    }
    CHECK(worst <= 2e-2);
}

TEST_CASE("expansive iterations raise a typed failure carrying the report") {
    // A Lipschitz constant this large makes the fixed-point map genuinely
    // expansive at the capped reporting weight.
    World w("constant", 1, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::VectorXd::Constant(1, 2.0));
    Hamiltonian wild = Hamiltonian::finite_control(
        {Control{Eigen::VectorXd::Constant(1, 40.0), 0.0},
         Control{Eigen::VectorXd::Constant(1, -40.0), 0.1}});
    PicardConfig pc;
    pc.alpha = 0.6;
    pc.cubature = gh_cub(7);
    pc.lattice_points = 9;
    pc.threads = 1;
    pc.time_nodes = 8;
    try {
        picard_solve(phi, wild, w.engine, pc);
        CHECK(false);
    } catch (const NonContractionError& e) {
        CHECK(std::string(e.tag()) == tags::non_contraction);
        CHECK(e.report().iterations >= 4);
        CHECK(e.report().ratios.back() > 1.0);
        CHECK(!e.report().converged);
    }
}

TEST_CASE("declared lipschitz constants are probed") {
    World w("constant", 1, 8, 2);
    const Terminal phi = cosine_terminal(Eigen::VectorXd::Constant(1, 1.0));
    Hamiltonian lying = Hamiltonian::finite_control(
        {Control{Eigen::VectorXd::Constant(1, 1.0), 0.0}});
    lying.lipschitz_c = 0.01;  // far below the true constant
    PicardConfig pc;
    pc.alpha = 0.5;
    pc.cubature = gh_cub(5);
    pc.lattice_points = 5;
    CHECK_THROWS_AS(picard_solve(phi, lying, w.engine, pc), ArgumentError);
}
