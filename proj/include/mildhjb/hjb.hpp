#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mildhjb/errors.hpp"
#include "mildhjb/gaussian.hpp"
#include "mildhjb/ou.hpp"

namespace mildhjb::hjb {

// Hamiltonian H(t, x, p). The finite-control form is
//   inf_u { <F_u, p> + h_u },  u over a finite set,
// with the exact minimum taken by enumeration (ties to the lowest index).
struct Control {
    Eigen::VectorXd drift;
    double cost = 0.0;
};

struct Hamiltonian {
    enum class Kind { zero, finite_control, custom };
    Kind kind = Kind::zero;
    std::function<double(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& p)> eval;
    double lipschitz_c = 0.0;
    std::vector<Control> controls;

    static Hamiltonian zero(int dim);
    static Hamiltonian finite_control(std::vector<Control> controls);
};

// Terminal datum with its gradient (used for the exact t = T slice).
struct Terminal {
    gaussian::StateFn value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
    double sup_norm = 1.0;
};

// Tensor lattice on [-half_width, half_width]^dim with multilinear
// interpolation; off-box queries clamp to the boundary and are counted.
class Lattice {
public:
    Lattice(int dim, int points_per_dim, double half_width);

    int dim() const { return dim_; }
    int points_per_dim() const { return points_; }
    double half_width() const { return half_width_; }
    long node_count() const { return count_; }
    double step() const { return step_; }

    Eigen::VectorXd node(long index) const;

    // Multilinear interpolation of per-node row vectors (fields has one row
    // per node). Returns the interpolated row; increments *clamped when x
    // leaves the box.
    Eigen::VectorXd interpolate_rows(const Eigen::MatrixXd& fields, const Eigen::VectorXd& x,
                                     long* clamped) const;

    bool operator==(const Lattice& other) const {
        return dim_ == other.dim_ && points_ == other.points_ &&
               half_width_ == other.half_width_;
    }

private:
    int dim_;
    int points_;
    double half_width_;
    double step_;
    long count_;
    std::vector<long> strides_;
};

// Time-sliced lattice representation of v(t, .) and its gradient field.
struct ValueIterate {
    std::vector<double> time_grid;          // t_0 < ... < t_M = T
    Lattice lattice;
    std::vector<Eigen::VectorXd> values;    // per slice, one entry per node
    std::vector<Eigen::MatrixXd> gradients; // per slice, node x dim
    double alpha = 0.5;

    double horizon() const { return time_grid.back(); }
    double sup_value() const;
    double sup_weighted_gradient() const;  // sup (T-t)^alpha |D_x v|
};

// Weighted distance
//   sup_t e^{-beta (T-t)} [ |v1-v2|(t) + (T-t)^alpha |Dv1-Dv2|(t) ]
// over the stored lattice. Grids and alpha must match.
double weighted_distance(const ValueIterate& a, const ValueIterate& b, double beta);

// Graded rule for int_t^T f(s) ds with cell boundaries
// b_j = t + (T-t)(j/m)^{1/(1-alpha)}; in-cell nodes are placed so that both
// constants and the kernel (s-t)^{-alpha} are integrated exactly.
struct TimeRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
TimeRule graded_time_rule(double t, double horizon, double alpha, int m);

struct GammaResult {
    ValueIterate iterate;
    long clamp_count = 0;
};

// One application of the mild-form map
//   gamma(v)(t,x) = [P(t,T) phi](x) + int_t^T [P(t,s) H(s, ., D_x v(s, .))](x) ds
// with values and gradients both from the smoothing formulas of the
// transition kernel (the stored field is only interpolated at the Gaussian
// sample points inside the time integral).
GammaResult gamma_map(const ValueIterate& v, const Hamiltonian& ham, const Terminal& terminal,
                      const ou::Engine& engine, const gaussian::Cubature& cub, int time_nodes,
                      int threads);

// The zeroth iterate v_0(t, .) = P(t,T) phi (the H = 0 fixed point).
GammaResult initial_iterate(const std::vector<double>& time_grid, const Lattice& lattice,
                            double alpha, const Terminal& terminal, const ou::Engine& engine,
                            const gaussian::Cubature& cub, int threads);

double contraction_probe(const ValueIterate& v1, const ValueIterate& v2,
                         const Hamiltonian& ham, const Terminal& terminal,
                         const ou::Engine& engine, const gaussian::Cubature& cub,
                         int time_nodes, double beta, int threads);

// (epsilon, beta) from the contraction proof: epsilon_1 / epsilon_2 are the
// smallest values meeting the two static conditions, epsilon adds a small
// margin, and beta is the smallest value putting both beta-dependent
// suprema (evaluated in closed form) under 1/5.
struct Schedule {
    double eps1 = 0.0;
    double eps2 = 0.0;
    double epsilon = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double beta = 0.0;
    double step1_static = 0.0;   // C T^{1-a} (1 - eps^{1-a}) / (1-a)
    double step2_static = 0.0;   // C^2 eps^{-a} [T(1-eps)]^{1-a} / (1-a)
    double step1_dynamic = 0.0;  // beta-dependent supremum, Step 1
    double step2_dynamic = 0.0;  // beta-dependent supremum, Step 2
};
Schedule schedule_beta(double lipschitz_c, double alpha, double horizon);

// sup over t in [0,T] of [eps (T-t)]^{1-alpha} exp(-beta (T-t)(1-eps)),
// evaluated in closed form (the proof's maximizer t_bar).
double step1_weight_supremum(double eps, double beta, double alpha, double horizon);

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    double alpha = 0.5;
    double lipschitz_c = 0.0;
    double epsilon = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double beta = 0.0;        // reporting/stopping weight (capped)
    double beta_proof = 0.0;  // the schedule's uncapped value
    double tolerance = 1e-4;
    std::vector<double> residuals_beta;
    std::vector<double> residuals_sup;
    std::vector<double> ratios;  // residual_beta[k] / residual_beta[k-1]
    long clamp_count = 0;
};

struct PicardConfig {
    double alpha = 0.5;
    double tolerance = 1e-4;
    int max_iterations = 50;
    int time_nodes = 16;
    int threads = 0;  // 0 = hardware default
    gaussian::Cubature cubature;
    int lattice_points = 9;
    double lattice_half_width = 0.0;  // 0 = auto from 3 sqrt(max diag Q_{T,0})
};

struct PicardResult {
    ValueIterate solution;
    SolveReport report;
};

// Thrown on three consecutive expansive iterations; carries the report.
class NonContractionError : public NumericalError {
public:
    NonContractionError(const std::string& what, SolveReport report)
        : NumericalError(tags::non_contraction, what), report_(std::move(report)) {}
    const SolveReport& report() const { return report_; }

private:
    SolveReport report_;
};

PicardResult picard_solve(const Terminal& terminal, const Hamiltonian& ham,
                          const ou::Engine& engine, const PicardConfig& config);

}  // namespace mildhjb::hjb
