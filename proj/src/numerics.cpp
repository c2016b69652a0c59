#include "mildhjb/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>

#include "mildhjb/errors.hpp"

namespace mildhjb {

namespace {

// Pade(13,13) coefficients (Higham 2005).
constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

}  // namespace

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    if (n != a.cols()) throw ArgumentError("expm: matrix must be square");
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > kTheta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    }
    const Eigen::MatrixXd as = a / std::ldexp(1.0, squarings);

    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd a2 = as * as;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a4 * a2;
    const Eigen::MatrixXd u =
        as * (a6 * (kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2) +
              kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 + kPade13[1] * id);
    const Eigen::MatrixXd v =
        a6 * (kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2) +
        kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 + kPade13[0] * id;

    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

Eigen::MatrixXd frozen_flow(const Eigen::MatrixXd& a, double h) {
    return expm((-h) * a);
}

CellStep frozen_step(const Eigen::MatrixXd& a, const Eigen::MatrixXd& n, double h) {
    const Eigen::Index d = a.rows();
    if (n.rows() != d || n.cols() != d) throw ArgumentError("frozen_step: size mismatch");
    // exp(h [[A, N], [0, -A^T]]) = [[e^{hA}, Y], [0, e^{-hA^T}]] with
    // e^{-hA} Y = \int_0^h e^{-uA} N e^{-uA^T} du.
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    block.topLeftCorner(d, d) = a;
    block.topRightCorner(d, d) = n;
    block.bottomRightCorner(d, d) = -a.transpose();
    const Eigen::MatrixXd e = expm(h * block);

    CellStep step;
    step.flow = e.bottomRightCorner(d, d).transpose();
    Eigen::MatrixXd q = step.flow * e.topRightCorner(d, d);
    step.noise = 0.5 * (q + q.transpose());
    return step;
}

const QuadRule& gauss_legendre_8() {
    static const QuadRule rule = [] {
        QuadRule r;
        r.nodes = {-0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
                   -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                   0.7966664774136267,  0.9602898564975362};
        r.weights = {0.10122853629037626, 0.22238103445337448, 0.31370664587788727,
                     0.36268378337836199, 0.36268378337836199, 0.31370664587788727,
                     0.22238103445337448, 0.10122853629037626};
        return r;
    }();
    return rule;
}

QuadRule gauss_hermite(int n) {
    if (n < 1) throw ArgumentError("gauss_hermite: need at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;
        wsum += rule.weights[i];
    }
    for (double& w : rule.weights) w /= wsum;
    return rule;
}

LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgumentError("fit_loglog: size mismatch");
    const std::size_t m = xs.size();
    if (m < 2) throw ArgumentError("fit_loglog: need at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> lx(m), ly(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw ArgumentError("fit_loglog: data must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) throw ArgumentError("fit_loglog: degenerate abscissae");
    LogLogFit fit;
    fit.slope = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / m;
    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(m));
    return fit;
}

Eigen::MatrixXd fractional_power(const Eigen::MatrixXd& a, double theta, double shift_w) {
    const Eigen::Index n = a.rows();
    if (n != a.cols()) throw ArgumentError("fractional_power: matrix must be square");
    const Eigen::MatrixXd shifted = a + shift_w * Eigen::MatrixXd::Identity(n, n);
    if (theta == 0.0) return Eigen::MatrixXd::Identity(n, n);
    if (theta == 1.0) return shifted;

    Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(shifted);
    if (es.info() != Eigen::Success)
        throw NumericalError(tags::rank_deficient, "fractional_power: eigendecomposition failed");
    Eigen::VectorXcd d = es.eigenvalues();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d(i).real() <= 0.0 && std::abs(d(i).imag()) < 1e-14 * (1.0 + std::abs(d(i).real())))
            throw NumericalError(tags::ellipticity,
                                 "fractional_power: spectrum touches the negative real axis");
        d(i) = std::pow(d(i), std::complex<double>(theta, 0.0));
    }
    const Eigen::MatrixXcd v = es.eigenvectors();
    const Eigen::MatrixXcd res = v * d.asDiagonal() * v.inverse();
    return res.real();
}

std::string format_double(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    return buf;
}

double spectral_norm(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues()(0);
}

}  // namespace mildhjb
