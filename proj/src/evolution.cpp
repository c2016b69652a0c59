#include "mildhjb/evolution.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include "mildhjb/errors.hpp"

namespace mildhjb::evolution {

namespace {

constexpr double kPi = std::numbers::pi;

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback, std::set<std::string>& seen) {
    seen.insert(key);
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& params,
                    const std::set<std::string>& known, const std::string& name) {
    for (const auto& [key, value] : params) {
        (void)value;
        if (!known.contains(key))
            throw ConfigError(tags::config_unknown_key,
                              "unknown parameter '" + key + "' for builtin '" + name + "'");
    }
}

}  // namespace

CoefficientField CoefficientField::builtin(const std::string& name,
                                           const std::map<std::string, double>& params,
                                           double horizon) {
    CoefficientField f;
    f.horizon = horizon;
    std::set<std::string> known;
    double k1 = 0.0, k2 = 0.0;
    if (name == "constant") {
        const double a = get_param(params, "a", 1.0, known);
        const double b = get_param(params, "b", 0.0, known);
        const double c = get_param(params, "c", 0.0, known);
        const double g = get_param(params, "g", 1.0, known);
        f.a = [a](double, double) { return a; };
        f.b = [b](double, double) { return b; };
        f.c = [c](double, double) { return c; };
        f.g = [g](double, double) { return g; };
    } else if (name == "linear_in_time") {
        const double a0 = get_param(params, "a0", 1.0, known);
        const double at = get_param(params, "a_slope", 1.0, known);
        const double b0 = get_param(params, "b0", 0.0, known);
        const double bt = get_param(params, "b_slope", 0.0, known);
        const double c0 = get_param(params, "c0", 0.0, known);
        const double ct = get_param(params, "c_slope", 0.0, known);
        const double g = get_param(params, "g", 1.0, known);
        f.a = [a0, at](double t, double) { return a0 + at * t; };
        f.b = [b0, bt](double t, double) { return b0 + bt * t; };
        f.c = [c0, ct](double t, double) { return c0 + ct * t; };
        f.g = [g](double, double) { return g; };
    } else if (name == "lp_example") {
        const double T = horizon;
        const double a0 = get_param(params, "a0", 1.0, known);
        const double at = get_param(params, "a_time", 0.3, known);
        const double ax = get_param(params, "a_space", 0.2, known);
        const double bamp = get_param(params, "b_amp", 0.5, known);
        const double camp = get_param(params, "c_amp", 0.5, known);
        const double g0 = get_param(params, "g0", 1.0, known);
        const double gamp = get_param(params, "g_amp", 0.5, known);
        k1 = get_param(params, "k1", 0.9, known);
        k2 = get_param(params, "k2", 1.6, known);
        f.a = [a0, at, ax, T](double t, double xi) {
            return a0 + at * (t / T) + ax * xi * (1.0 - xi);
        };
        f.b = [bamp, T](double t, double xi) {
            return bamp * (1.0 - 2.0 * xi) * (0.5 + 0.5 * t / T);
        };
        f.c = [camp, T](double t, double xi) { return camp * std::cos(kPi * xi) * (t / T); };
        f.g = [g0, gamp, T](double t, double xi) {
            return g0 + gamp * std::sin(kPi * xi) * (1.0 - 0.5 * t / T);
        };
        f.holder_mu = 1.0;
    } else {
        throw ConfigError(tags::config_value, "unknown coefficient builtin '" + name + "'");
    }
    reject_unknown(params, known, name);
    f.validate();
    if (k2 > 0.0 && (f.g_lower <= k1 || f.g_upper >= k2))
        throw NumericalError(tags::noise_bound,
                             "lp_example requires k1 < |g| < k2 on the sample grid");
    return f;
}

CoefficientField CoefficientField::from_lattice_csv(const std::string& path, double horizon) {
    std::ifstream in(path);
    if (!in) throw ConfigError(tags::config_missing_file, "cannot open lattice file " + path);
    std::string header;
    if (!std::getline(in, header))
        throw ConfigError(tags::config_parse, "empty lattice file " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != "t,xi,a,b,c,g")
        throw ConfigError(tags::config_parse, "lattice header must be t,xi,a,b,c,g");

    struct Row {
        double t, xi, a, b, c, g;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        Row r{};
        if (!(ss >> r.t >> r.xi >> r.a >> r.b >> r.c >> r.g))
            throw ConfigError(tags::config_parse, "bad lattice row '" + line + "'");
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError(tags::config_parse, "lattice file has no data rows");

    std::vector<double> ts, xis;
    for (const Row& r : rows) {
        ts.push_back(r.t);
        xis.push_back(r.xi);
    }
    auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(ts);
    uniq(xis);
    const std::size_t nt = ts.size(), nx = xis.size();
    if (nt < 2 || nx < 2)
        throw ConfigError(tags::config_parse, "lattice needs at least 2x2 points");
    if (rows.size() != nt * nx)
        throw ConfigError(tags::config_parse, "lattice is not a full t-by-xi grid");

    auto index_of = [](const std::vector<double>& v, double x) {
        auto it = std::lower_bound(v.begin(), v.end(), x);
        return static_cast<std::size_t>(it - v.begin());
    };
    auto grid = std::make_shared<std::array<std::vector<double>, 4>>();
    for (auto& g : *grid) g.assign(nt * nx, std::numeric_limits<double>::quiet_NaN());
    for (const Row& r : rows) {
        const std::size_t i = index_of(ts, r.t), j = index_of(xis, r.xi);
        const std::size_t k = i * nx + j;
        (*grid)[0][k] = r.a;
        (*grid)[1][k] = r.b;
        (*grid)[2][k] = r.c;
        (*grid)[3][k] = r.g;
    }
    for (const auto& g : *grid)
        for (double v : g)
            if (std::isnan(v))
                throw ConfigError(tags::config_parse, "lattice is missing grid entries");

    auto tsp = std::make_shared<std::vector<double>>(std::move(ts));
    auto xsp = std::make_shared<std::vector<double>>(std::move(xis));
    auto interp = [tsp, xsp, grid, nx](int field, double t, double xi) {
        auto locate = [](const std::vector<double>& v, double x, std::size_t& i0, double& w) {
            if (x <= v.front()) {
                i0 = 0;
                w = 0.0;
                return;
            }
            if (x >= v.back()) {
                i0 = v.size() - 2;
                w = 1.0;
                return;
            }
            auto it = std::upper_bound(v.begin(), v.end(), x);
            i0 = static_cast<std::size_t>(it - v.begin()) - 1;
            w = (x - v[i0]) / (v[i0 + 1] - v[i0]);
        };
        std::size_t i0, j0;
        double wt, wx;
        locate(*tsp, t, i0, wt);
        locate(*xsp, xi, j0, wx);
        const std::vector<double>& g = (*grid)[field];
        const double v00 = g[i0 * nx + j0], v01 = g[i0 * nx + j0 + 1];
        const double v10 = g[(i0 + 1) * nx + j0], v11 = g[(i0 + 1) * nx + j0 + 1];
        return (1.0 - wt) * ((1.0 - wx) * v00 + wx * v01) +
               wt * ((1.0 - wx) * v10 + wx * v11);
    };

    CoefficientField f;
    f.horizon = horizon;
    f.a = [interp](double t, double xi) { return interp(0, t, xi); };
    f.b = [interp](double t, double xi) { return interp(1, t, xi); };
    f.c = [interp](double t, double xi) { return interp(2, t, xi); };
    f.g = [interp](double t, double xi) { return interp(3, t, xi); };
    f.validate();
    return f;
}

void CoefficientField::validate(int time_samples, int space_samples) {
    if (horizon <= 0.0) throw ArgumentError("coefficient field: horizon must be positive");
    if (!(holder_mu > 0.25 && holder_mu <= 1.0))
        throw ArgumentError("coefficient field: holder_mu must lie in (1/4, 1]");
    if (sector_shift_w < 0.0) throw ArgumentError("coefficient field: sector shift w < 0");
    if (space_holder_eps <= 0.0)
        throw ArgumentError("coefficient field: space_holder_eps must be positive");

    double a_min = std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = 0.0;
    double a_min_t = 0.0, a_min_xi = 0.0;
    for (int i = 0; i < time_samples; ++i) {
        const double t = horizon * i / (time_samples - 1);
        for (int j = 0; j < space_samples; ++j) {
            const double xi = static_cast<double>(j) / (space_samples - 1);
            const double av = a(t, xi);
            if (av < a_min) {
                a_min = av;
                a_min_t = t;
                a_min_xi = xi;
            }
            const double gv = std::abs(g(t, xi));
            g_min = std::min(g_min, gv);
            g_max = std::max(g_max, gv);
        }
    }
    if (!(a_min > 0.0))
        throw NumericalError(tags::ellipticity,
                             "a(t,xi) = " + format_double(a_min) + " <= 0 at t=" +
                                 format_double(a_min_t) + ", xi=" + format_double(a_min_xi));
    if (!(g_min > 0.0))
        throw NumericalError(tags::noise_bound, "|g| is not bounded away from zero");
    g_lower = g_min;
    g_upper = g_max;
}

SpectralBasis::SpectralBasis(int n) : modes(n) {
    if (n < 1) throw ArgumentError("spectral basis: need at least one mode");
    eigenvalues.resize(n);
    for (int k = 1; k <= n; ++k) eigenvalues(k - 1) = (k * kPi) * (k * kPi);
}

double SpectralBasis::eval(int n, double xi) const {
    return std::numbers::sqrt2 * std::sin(n * kPi * xi);
}

double SpectralBasis::eval_deriv(int n, double xi) const {
    return std::numbers::sqrt2 * n * kPi * std::cos(n * kPi * xi);
}

namespace {

template <typename Entry>
void quadrature_sweep(const SpectralBasis& basis, Entry&& entry) {
    const int elements = 4 * basis.modes;
    const QuadRule& gl = gauss_legendre_8();
    for (int e = 0; e < elements; ++e) {
        const double x0 = static_cast<double>(e) / elements;
        const double x1 = static_cast<double>(e + 1) / elements;
        const double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0);
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
            entry(mid + half * gl.nodes[q], half * gl.weights[q]);
        }
    }
}

}  // namespace

Eigen::MatrixXd assemble_operator(const CoefficientField& coeffs, double t,
                                  const SpectralBasis& basis) {
    const int n = basis.modes;
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd em(n), en(n), ed(n);
    quadrature_sweep(basis, [&](double xi, double w) {
        const double av = coeffs.a(t, xi);
        if (!(av > 0.0))
            throw NumericalError(tags::ellipticity,
                                 "a(t,xi) = " + format_double(av) + " <= 0 at t=" +
                                     format_double(t) + ", xi=" + format_double(xi));
        const double bv = coeffs.b(t, xi);
        const double cv = coeffs.c(t, xi);
        for (int k = 1; k <= n; ++k) {
            em(k - 1) = basis.eval(k, xi);
            ed(k - 1) = basis.eval_deriv(k, xi);
        }
        for (int col = 0; col < n; ++col) {
            en(col) = av * basis.eigenvalues(col) * em(col) + bv * ed(col) + cv * em(col);
        }
        mat.noalias() += w * em * en.transpose();
    });
    return mat;
}

Eigen::MatrixXd galerkin_multiplication(const ScalarField& f, double t,
                                        const SpectralBasis& basis) {
    const int n = basis.modes;
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd em(n);
    quadrature_sweep(basis, [&](double xi, double w) {
        const double fv = f(t, xi);
        for (int k = 1; k <= n; ++k) em(k - 1) = basis.eval(k, xi);
        mat.noalias() += (w * fv) * em * em.transpose();
    });
    return mat;
}

Propagator::Propagator(const CoefficientField& coeffs, const SpectralBasis& basis,
                       int time_cells, int substeps_per_cell)
    : coeffs_(&coeffs),
      basis_(&basis),
      time_cells_(time_cells),
      substeps_(substeps_per_cell),
      dim_(basis.modes),
      horizon_(coeffs.horizon) {
    if (time_cells < 1 || substeps_per_cell < 1)
        throw ArgumentError("propagator: grid sizes must be positive");
    const int steps = time_cells_ * substeps_;
    grid_.resize(steps + 1);
    for (int i = 0; i <= steps; ++i) grid_[i] = horizon_ * i / steps;
    flows_.reserve(steps);
    for (int i = 0; i < steps; ++i) {
        const double h = grid_[i + 1] - grid_[i];
        const double mid = 0.5 * (grid_[i] + grid_[i + 1]);
        flows_.push_back(frozen_flow(assemble_operator(*coeffs_, mid, *basis_), h));
    }
}

int Propagator::snap(double t, bool* snapped) const {
    const int steps = this->steps();
    const double h = horizon_ / steps;
    int idx = static_cast<int>(std::lround(t / h));
    idx = std::clamp(idx, 0, steps);
    const bool off = std::abs(t - grid_[idx]) > 1e-12 * std::max(1.0, horizon_);
    if (snapped) *snapped = off;
    if (off) ++snap_count_;
    return idx;
}

Eigen::MatrixXd Propagator::matrix_by_index(int i, int j) const {
    if (i < 0 || j > steps() || i > j) throw ArgumentError("propagator: need 0 <= i <= j");
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim_, dim_);
    for (int q = i; q < j; ++q) s = flows_[q] * s;
    return s;
}

Eigen::MatrixXd Propagator::operator()(double s, double t) const {
    if (s > t) throw ArgumentError("propagator: requires s <= t");
    const int i = snap(s);
    const int j = snap(t);
    return matrix_by_index(std::min(i, j), std::max(i, j));
}

Eigen::MatrixXd Propagator::fragment_flow(double r0, double r1) const {
    if (r1 < r0) throw ArgumentError("propagator: fragment requires r0 <= r1");
    if (r1 == r0) return Eigen::MatrixXd::Identity(dim_, dim_);
    const double mid = 0.5 * (r0 + r1);
    return frozen_flow(assemble_operator(*coeffs_, mid, *basis_), r1 - r0);
}

Eigen::MatrixXd Propagator::flow_from_index(int i, double t) const {
    if (i < 0 || i > steps()) throw ArgumentError("propagator: bad start index");
    if (t < grid_[i] - 1e-12 || t > horizon_ * (1.0 + 1e-12))
        throw ArgumentError("propagator: time outside [grid[i], T]");
    const double h = horizon_ / steps();
    int j = static_cast<int>(std::floor(t / h + 1e-9));
    j = std::clamp(j, i, steps());
    Eigen::MatrixXd s = matrix_by_index(i, j);
    if (t > grid_[j]) s = fragment_flow(grid_[j], t) * s;
    return s;
}

ExponentFit smoothing_exponent_probe(const Propagator& prop, double theta,
                                     const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 4)
        throw ArgumentError("smoothing_exponent_probe: need at least 4 (s,t) pairs");
    double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0;
    for (const auto& [s, t] : pairs) {
        if (!(t > s)) throw ArgumentError("smoothing_exponent_probe: pairs need s < t");
        gmin = std::min(gmin, t - s);
        gmax = std::max(gmax, t - s);
    }
    if (gmax / gmin < std::pow(10.0, 1.5) * (1.0 - 1e-9))
        throw NumericalError(tags::fit_span,
                             "pairs span " + format_double(std::log10(gmax / gmin)) +
                                 " decades of t-s; need at least 1.5");
    ExponentFit fit;
    for (const auto& [s, t] : pairs) {
        const Eigen::MatrixXd st = prop(s, t);
        const Eigen::MatrixXd at = assemble_operator(prop.coefficients(), t, prop.basis());
        const Eigen::MatrixXd pw =
            fractional_power(at, theta, prop.coefficients().sector_shift_w);
        fit.gaps.push_back(t - s);
        fit.norms.push_back(spectral_norm(pw * st));
    }
    const LogLogFit ls = fit_loglog(fit.gaps, fit.norms);
    fit.exponent = ls.slope;
    fit.residual = ls.residual;
    return fit;
}

std::vector<std::pair<double, double>> fit_pairs_on_grid(const Propagator& prop,
                                                         int min_pairs) {
    static constexpr int kLadder[] = {1, 2, 4, 7, 12, 20, 32, 51, 81, 128};
    const int steps = prop.steps();
    const double h = prop.horizon() / steps;
    std::vector<std::pair<double, double>> pairs;
    for (int k : kLadder) {
        if (k > steps) break;
        pairs.emplace_back(0.0, k * h);
    }
    const double span =
        pairs.size() < 2 ? 0.0
                         : (pairs.back().second - pairs.back().first) / (pairs.front().second -
                                                                         pairs.front().first);
    if (static_cast<int>(pairs.size()) < min_pairs || span < std::pow(10.0, 1.5) * (1 - 1e-9))
        throw NumericalError(tags::fit_span,
                             "substep grid too coarse to span 1.5 decades with " +
                                 std::to_string(min_pairs) + " pairs");
    return pairs;
}

}  // namespace mildhjb::evolution
