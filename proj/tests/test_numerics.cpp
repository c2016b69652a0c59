#include "mildhjb/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <cstdlib>
#include <random>

#include "doctest.h"
#include "mildhjb/errors.hpp"
#include "oracles.hpp"

using namespace mildhjb;

TEST_CASE("expm matches a reference implementation on random matrices") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 5;
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
        a *= (trial % 3 + 1);
        const Eigen::MatrixXd ours = expm(a);
        const Eigen::MatrixXd ref = a.exp();
        CHECK((ours - ref).norm() <= 1e-12 * ref.norm());
    }
}

TEST_CASE("expm is exact on diagonal input") {
    Eigen::MatrixXd a = Eigen::Vector3d(-0.3, -2.0, -40.0).asDiagonal();
    const Eigen::MatrixXd e = expm(a);
    for (int i = 0; i < 3; ++i)
        CHECK(e(i, i) == doctest::Approx(std::exp(a(i, i))).epsilon(1e-14));
    CHECK(e(0, 1) == 0.0);
}

TEST_CASE("frozen_step reproduces the scalar heat flow and Gramian") {
    const double lambda = oracles::kPi * oracles::kPi;
    Eigen::MatrixXd a(1, 1), n(1, 1);
    a << lambda;
    n << 1.0;
    const double h = 0.02;
    const CellStep step = frozen_step(a, n, h);
    CHECK(step.flow(0, 0) == doctest::Approx(oracles::heat_flow(lambda, h)).epsilon(1e-13));
    CHECK(step.noise(0, 0) ==
          doctest::Approx(oracles::heat_gramian(lambda, h)).epsilon(1e-13));
}

TEST_CASE("frozen_step noise matches brute-force quadrature for a full matrix") {
    Eigen::MatrixXd a(3, 3);
    a << 9.0, 1.5, -0.3, 0.8, 22.0, 2.0, -0.4, 1.0, 45.0;
    Eigen::MatrixXd g(3, 3);
    g << 1.0, 0.2, 0.0, 0.2, 0.9, 0.1, 0.0, 0.1, 1.1;
    const Eigen::MatrixXd noise_intensity = g * g.transpose();
    const double h = 0.05;
    const CellStep step = frozen_step(a, noise_intensity, h);
    const Eigen::MatrixXd ref = oracles::simpson_matrix(
        [&](double u) {
            const Eigen::MatrixXd e = expm((-u) * a);
            return Eigen::MatrixXd(e * noise_intensity * e.transpose());
        },
        h, 2000);
    CHECK((step.noise - ref).norm() <= 1e-10 * ref.norm());
    CHECK((step.flow - expm((-h) * a)).norm() <= 1e-13);
}

TEST_CASE("gauss_hermite moments") {
    for (int n : {2, 3, 5, 9, 15}) {
        const QuadRule rule = gauss_hermite(n);
        double w = 0, m1 = 0, m2 = 0, m4 = 0, m6 = 0;
        for (int i = 0; i < n; ++i) {
            w += rule.weights[i];
            m1 += rule.weights[i] * rule.nodes[i];
            m2 += rule.weights[i] * std::pow(rule.nodes[i], 2);
            m4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
            m6 += rule.weights[i] * std::pow(rule.nodes[i], 6);
        }
        CHECK(std::abs(w - 1.0) <= 1e-14);
        CHECK(std::abs(m1) <= 1e-13);
        CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
        if (n >= 3) CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
        if (n >= 4) CHECK(m6 == doctest::Approx(15.0).epsilon(1e-11));
    }
}

TEST_CASE("gauss_legendre_8 integrates polynomials up to degree 15") {
    const QuadRule& rule = gauss_legendre_8();
    for (int k = 0; k <= 15; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i)
            acc += rule.weights[i] * std::pow(rule.nodes[i], k);
        const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
        CHECK(std::abs(acc - exact) <= 1e-14);
    }
}

TEST_CASE("fit_loglog recovers a power law") {
    std::vector<double> xs, ys;
    for (int i = 1; i <= 12; ++i) {
        const double x = std::pow(10.0, -3.0 + 0.25 * i);
        xs.push_back(x);
        ys.push_back(2.5 * std::pow(x, -0.75));
    }
    const LogLogFit fit = fit_loglog(xs, ys);
    CHECK(fit.slope == doctest::Approx(-0.75).epsilon(1e-12));
    CHECK(fit.residual <= 1e-12);
    CHECK_THROWS_AS(fit_loglog({1.0}, {1.0}), ArgumentError);
}

TEST_CASE("fractional_power on diagonal and SPD matrices") {
    Eigen::MatrixXd a = Eigen::Vector2d(4.0, 9.0).asDiagonal();
    const Eigen::MatrixXd half = fractional_power(a, 0.5);
    CHECK(half(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(half(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK((fractional_power(a, 0.0) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK((fractional_power(a, 1.0, 0.5) - (a + 0.5 * Eigen::MatrixXd::Identity(2, 2)))
              .norm() == 0.0);

    Eigen::MatrixXd b(3, 3);
    b << 5.0, 1.0, 0.2, 1.0, 7.0, 0.5, 0.2, 0.5, 9.0;
    const Eigen::MatrixXd root = fractional_power(b, 0.5);
    CHECK((root * root - b).norm() <= 1e-11 * b.norm());
}

TEST_CASE("format_double round-trips") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 3.141592653589793}) {
        CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
    }
}
