#include "mildhjb/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mildhjb/errors.hpp"
#include "mildhjb/numerics.hpp"

namespace mildhjb::scenario {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& path) {
    if (!obj.is_object())
        throw ConfigError(tags::config_parse, "expected an object at " + path);
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(tags::config_unknown_key,
                              "unknown key '" + path + key + "'");
    }
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(tags::config_value, path + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer())
        throw ConfigError(tags::config_value, path + " must be an integer");
    return j.get<int>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(tags::config_value, path + " must be a string");
    return j.get<std::string>();
}

std::vector<double> as_vector(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(tags::config_value, path + " must be an array");
    std::vector<double> v;
    for (const auto& e : j) v.push_back(as_number(e, path + "[]"));
    return v;
}

}  // namespace

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(tags::config_missing_file, "cannot open config file " + path);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(tags::config_parse, std::string("config parse error: ") + e.what());
    }

    Config c;
    check_keys(root,
               {"coefficients", "modes", "time_cells", "substeps_per_cell", "cubature",
                "alpha_override", "hamiltonian", "terminal", "lattice", "solver",
                "diagnostics", "output_dir", "seed"},
               "");

    if (root.contains("coefficients")) {
        const json& co = root["coefficients"];
        check_keys(co,
                   {"builtin", "params", "lattice_file", "horizon", "holder_mu",
                    "sector_shift_w", "space_holder_eps"},
                   "coefficients.");
        if (co.contains("builtin")) c.coeff_builtin = as_string(co["builtin"], "builtin");
        if (co.contains("lattice_file"))
            c.coeff_lattice_file = as_string(co["lattice_file"], "lattice_file");
        if (co.contains("horizon")) c.horizon = as_number(co["horizon"], "horizon");
        if (co.contains("holder_mu")) c.holder_mu = as_number(co["holder_mu"], "holder_mu");
        if (co.contains("sector_shift_w"))
            c.sector_shift_w = as_number(co["sector_shift_w"], "sector_shift_w");
        if (co.contains("space_holder_eps"))
            c.space_holder_eps = as_number(co["space_holder_eps"], "space_holder_eps");
        if (co.contains("params")) {
            if (!co["params"].is_object())
                throw ConfigError(tags::config_value, "coefficients.params must be an object");
            for (const auto& [key, value] : co["params"].items())
                c.coeff_params[key] = as_number(value, "coefficients.params." + key);
        }
    }
    if (root.contains("modes")) c.modes = as_int(root["modes"], "modes");
    if (root.contains("time_cells")) c.time_cells = as_int(root["time_cells"], "time_cells");
    if (root.contains("substeps_per_cell"))
        c.substeps_per_cell = as_int(root["substeps_per_cell"], "substeps_per_cell");

    bool cubature_kind_set = false;
    if (root.contains("cubature")) {
        const json& cu = root["cubature"];
        check_keys(cu, {"kind", "nodes_per_dim", "sample_count"}, "cubature.");
        if (cu.contains("kind")) {
            cubature_kind_set = true;
            const std::string kind = as_string(cu["kind"], "cubature.kind");
            if (kind == "gauss_hermite")
                c.cubature.kind = gaussian::Cubature::Kind::gauss_hermite_tensor;
            else if (kind == "monte_carlo")
                c.cubature.kind = gaussian::Cubature::Kind::monte_carlo;
            else
                throw ConfigError(tags::config_value, "unknown cubature kind '" + kind + "'");
        }
        if (cu.contains("nodes_per_dim"))
            c.cubature.nodes_per_dim = as_int(cu["nodes_per_dim"], "cubature.nodes_per_dim");
        if (cu.contains("sample_count"))
            c.cubature.sample_count = as_int(cu["sample_count"], "cubature.sample_count");
    }

    if (root.contains("alpha_override") && !root["alpha_override"].is_null())
        c.alpha_override = as_number(root["alpha_override"], "alpha_override");

    if (root.contains("hamiltonian")) {
        const json& ha = root["hamiltonian"];
        check_keys(ha, {"kind", "controls"}, "hamiltonian.");
        if (ha.contains("kind")) c.hamiltonian_kind = as_string(ha["kind"], "hamiltonian.kind");
        if (c.hamiltonian_kind != "zero" && c.hamiltonian_kind != "finite_control")
            throw ConfigError(tags::config_value,
                              "unknown hamiltonian kind '" + c.hamiltonian_kind + "'");
        if (ha.contains("controls")) {
            if (!ha["controls"].is_array())
                throw ConfigError(tags::config_value, "hamiltonian.controls must be an array");
            for (const auto& entry : ha["controls"]) {
                check_keys(entry, {"drift", "cost"}, "hamiltonian.controls[].");
                hjb::Control u;
                const auto drift = as_vector(entry.at("drift"), "controls[].drift");
                u.drift = Eigen::Map<const Eigen::VectorXd>(drift.data(),
                                                            static_cast<long>(drift.size()));
                if (entry.contains("cost")) u.cost = as_number(entry["cost"], "controls[].cost");
                c.controls.push_back(std::move(u));
            }
        }
    }

    if (root.contains("terminal")) {
        const json& te = root["terminal"];
        check_keys(te, {"builtin", "params"}, "terminal.");
        if (te.contains("builtin")) c.terminal_builtin = as_string(te["builtin"], "terminal");
        if (te.contains("params")) {
            check_keys(te["params"], {"u", "cap"}, "terminal.params.");
            if (te["params"].contains("u"))
                c.terminal_u = as_vector(te["params"]["u"], "terminal.params.u");
            if (te["params"].contains("cap"))
                c.terminal_cap = as_number(te["params"]["cap"], "terminal.params.cap");
        }
    }

    if (root.contains("lattice")) {
        const json& la = root["lattice"];
        check_keys(la, {"points_per_dim", "half_width"}, "lattice.");
        if (la.contains("points_per_dim"))
            c.lattice_points = as_int(la["points_per_dim"], "lattice.points_per_dim");
        if (la.contains("half_width"))
            c.lattice_half_width = as_number(la["half_width"], "lattice.half_width");
    }

    if (root.contains("solver")) {
        const json& so = root["solver"];
        check_keys(so, {"tolerance", "max_iterations", "time_nodes", "pinv_tol", "threads"},
                   "solver.");
        if (so.contains("tolerance")) c.tolerance = as_number(so["tolerance"], "tolerance");
        if (so.contains("max_iterations"))
            c.max_iterations = as_int(so["max_iterations"], "max_iterations");
        if (so.contains("time_nodes")) c.time_nodes = as_int(so["time_nodes"], "time_nodes");
        if (so.contains("pinv_tol")) c.pinv_tol = as_number(so["pinv_tol"], "pinv_tol");
        if (so.contains("threads")) c.threads = as_int(so["threads"], "threads");
    }

    if (root.contains("diagnostics")) {
        const json& di = root["diagnostics"];
        check_keys(di, {"triples", "gamma_sigmas", "gamma_n_max"}, "diagnostics.");
        if (di.contains("triples")) c.diag_triples = as_int(di["triples"], "triples");
        if (di.contains("gamma_sigmas"))
            c.gamma_sigmas = as_vector(di["gamma_sigmas"], "gamma_sigmas");
        if (di.contains("gamma_n_max")) c.gamma_n_max = as_int(di["gamma_n_max"], "gamma_n_max");
    }

    if (root.contains("output_dir")) c.output_dir = as_string(root["output_dir"], "output_dir");
    if (root.contains("seed")) {
        if (!root["seed"].is_number_integer())
            throw ConfigError(tags::config_value, "seed must be an integer");
        c.seed = root["seed"].get<std::uint64_t>();
    }

    if (c.modes < 1 || c.modes > 4)
        throw ConfigError(tags::config_value, "modes must lie in 1..4");
    // Tensor rules are the default up to three modes; above that the
    // default integrator is seeded Monte Carlo.
    if (!cubature_kind_set && c.modes > 3)
        c.cubature.kind = gaussian::Cubature::Kind::monte_carlo;
    if (c.time_cells < 1 || c.substeps_per_cell < 1)
        throw ConfigError(tags::config_value, "grid sizes must be positive");
    if (c.horizon <= 0.0) throw ConfigError(tags::config_value, "horizon must be positive");
    return c;
}

std::vector<std::pair<std::string, std::string>> Config::flatten() const {
    std::vector<std::pair<std::string, std::string>> kv;
    auto add = [&kv](const std::string& k, const std::string& v) { kv.emplace_back(k, v); };
    add("coefficients.builtin", coeff_lattice_file.empty() ? coeff_builtin : "");
    add("coefficients.lattice_file", coeff_lattice_file);
    for (const auto& [k, v] : coeff_params)
        add("coefficients.params." + k, format_double(v));
    add("coefficients.horizon", format_double(horizon));
    if (holder_mu) add("coefficients.holder_mu", format_double(*holder_mu));
    add("coefficients.sector_shift_w", format_double(sector_shift_w));
    add("coefficients.space_holder_eps", format_double(space_holder_eps));
    add("modes", std::to_string(modes));
    add("time_cells", std::to_string(time_cells));
    add("substeps_per_cell", std::to_string(substeps_per_cell));
    add("cubature.kind", cubature.kind == gaussian::Cubature::Kind::gauss_hermite_tensor
                             ? "gauss_hermite"
                             : "monte_carlo");
    add("cubature.nodes_per_dim", std::to_string(cubature.nodes_per_dim));
    add("cubature.sample_count", std::to_string(cubature.sample_count));
    if (alpha_override) add("alpha_override", format_double(*alpha_override));
    add("hamiltonian.kind", hamiltonian_kind);
    for (std::size_t i = 0; i < controls.size(); ++i) {
        std::ostringstream os;
        for (int d = 0; d < controls[i].drift.size(); ++d) {
            if (d) os << ' ';
            os << format_double(controls[i].drift(d));
        }
        add("hamiltonian.controls." + std::to_string(i) + ".drift", os.str());
        add("hamiltonian.controls." + std::to_string(i) + ".cost",
            format_double(controls[i].cost));
    }
    add("terminal.builtin", terminal_builtin);
    if (!terminal_u.empty()) {
        std::ostringstream os;
        for (std::size_t d = 0; d < terminal_u.size(); ++d) {
            if (d) os << ' ';
            os << format_double(terminal_u[d]);
        }
        add("terminal.params.u", os.str());
    }
    add("terminal.params.cap", format_double(terminal_cap));
    add("lattice.points_per_dim", std::to_string(lattice_points));
    add("lattice.half_width", format_double(lattice_half_width));
    add("solver.tolerance", format_double(tolerance));
    add("solver.max_iterations", std::to_string(max_iterations));
    add("solver.time_nodes", std::to_string(time_nodes));
    add("solver.pinv_tol", format_double(pinv_tol));
    add("solver.threads", std::to_string(threads));
    add("diagnostics.triples", std::to_string(diag_triples));
    add("diagnostics.gamma_n_max", std::to_string(gamma_n_max));
    add("output_dir", output_dir);
    add("seed", std::to_string(seed));
    std::sort(kv.begin(), kv.end());
    return kv;
}

evolution::CoefficientField build_coefficients(const Config& config) {
    evolution::CoefficientField f =
        config.coeff_lattice_file.empty()
            ? evolution::CoefficientField::builtin(config.coeff_builtin, config.coeff_params,
                                                   config.horizon)
            : evolution::CoefficientField::from_lattice_csv(config.coeff_lattice_file,
                                                            config.horizon);
    if (config.holder_mu) f.holder_mu = *config.holder_mu;
    f.sector_shift_w = config.sector_shift_w;
    f.space_holder_eps = config.space_holder_eps;
    f.validate();
    return f;
}

hjb::Terminal build_terminal(const Config& config, int dim) {
    hjb::Terminal t;
    if (config.terminal_builtin == "cos_linear") {
        Eigen::VectorXd u = Eigen::VectorXd::Ones(dim);
        if (!config.terminal_u.empty()) {
            if (static_cast<int>(config.terminal_u.size()) != dim)
                throw ConfigError(tags::config_value,
                                  "terminal.params.u must have one entry per mode");
            u = Eigen::Map<const Eigen::VectorXd>(config.terminal_u.data(), dim);
        }
        t.value = [u](const Eigen::VectorXd& x) { return std::cos(u.dot(x)); };
        t.grad = [u](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(-std::sin(u.dot(x)) * u);
        };
        t.sup_norm = 1.0;
    } else if (config.terminal_builtin == "bounded_quadratic") {
        const double cap = config.terminal_cap;
        if (cap <= 0.0)
            throw ConfigError(tags::config_value, "terminal.params.cap must be positive");
        t.value = [cap](const Eigen::VectorXd& x) { return std::min(x.squaredNorm(), cap); };
        t.grad = [cap](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(x.squaredNorm() < cap ? (2.0 * x).eval()
                                                         : Eigen::VectorXd::Zero(x.size()).eval());
        };
        t.sup_norm = cap;
    } else {
        throw ConfigError(tags::config_value,
                          "unknown terminal builtin '" + config.terminal_builtin + "'");
    }
    return t;
}

hjb::Hamiltonian build_hamiltonian(const Config& config, int dim) {
    if (config.hamiltonian_kind == "zero") return hjb::Hamiltonian::zero(dim);
    if (config.controls.empty())
        throw ConfigError(tags::config_value, "finite_control needs a non-empty control table");
    for (const auto& u : config.controls)
        if (u.drift.size() != dim)
            throw ConfigError(tags::config_value,
                              "control drift dimension must equal the mode count");
    return hjb::Hamiltonian::finite_control(config.controls);
}

double resolve_alpha(const Config& config, const ou::AlphaFit& fit) {
    if (config.alpha_override) {
        const double a = *config.alpha_override;
        if (!(a > 0.0 && a < 1.0))
            throw ConfigError(tags::config_value, "alpha_override must lie in (0,1)");
        return a;
    }
    const double rounded = std::ceil(fit.alpha_hat * 10.0 - 1e-9) / 10.0;
    if (!(rounded > 0.0 && rounded < 1.0))
        throw NumericalError(tags::fit_span,
                             "fitted smoothing exponent " + format_double(fit.alpha_hat) +
                                 " leaves no admissible alpha in (0,1)");
    return rounded;
}

namespace {

struct OuDiagnostics {
    double max_embedding = 0.0;
    int rows = 0;
};

OuDiagnostics write_ou_diagnostics(const Config& config, const ou::Engine& engine,
                                   const std::string& path) {
    const auto& prop = engine.propagator();
    const int steps = prop.steps();
    std::mt19937_64 rng(config.seed);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(tags::io_error, "cannot write " + path);
    out << "s,t,r,embedding_norm,sigma_norm,gramian_rank\n";
    OuDiagnostics diag;
    if (steps < 3) return diag;
    std::uniform_int_distribution<int> pick(0, steps);
    long attempts = 0;
    while (diag.rows < config.diag_triples && attempts++ < 20L * config.diag_triples) {
        int i = pick(rng), j = pick(rng), k = pick(rng);
        int lo = std::min({i, j, k}), hi = std::max({i, j, k});
        int mid = i + j + k - lo - hi;
        if (lo == mid || mid == hi) continue;
        const double s = prop.grid()[lo], r = prop.grid()[mid], t = prop.grid()[hi];
        const double emb = engine.embedding_norm(s, r, t);
        const ou::Gramian gram = engine.gramian(s, t);
        const ou::SigmaMap sm = engine.sigma_map(gram);
        out << format_double(s) << ',' << format_double(t) << ',' << format_double(r) << ','
            << format_double(emb) << ',' << format_double(sm.op_norm) << ','
            << gram.state.rank() << '\n';
        diag.max_embedding = std::max(diag.max_embedding, emb);
        ++diag.rows;
    }
    return diag;
}

void write_solution_csv(const hjb::ValueIterate& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(tags::io_error, "cannot write " + path);
    const int dim = v.lattice.dim();
    out << 't';
    for (int d = 1; d <= dim; ++d) out << ",x" << d;
    out << ",v";
    for (int d = 1; d <= dim; ++d) out << ",g" << d;
    out << '\n';
    for (std::size_t i = 0; i < v.time_grid.size(); ++i) {
        for (long n = 0; n < v.lattice.node_count(); ++n) {
            out << format_double(v.time_grid[i]);
            const Eigen::VectorXd x = v.lattice.node(n);
            for (int d = 0; d < dim; ++d) out << ',' << format_double(x(d));
            out << ',' << format_double(v.values[i](n));
            for (int d = 0; d < dim; ++d) out << ',' << format_double(v.gradients[i](n, d));
            out << '\n';
        }
    }
}

void write_report(const Config& config, const hjb::SolveReport& report, double alpha_hat,
                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(tags::io_error, "cannot write " + path);
    out << "converged = " << (report.converged ? "true" : "false") << '\n';
    out << "iterations = " << report.iterations << '\n';
    out << "alpha = " << format_double(report.alpha) << '\n';
    out << "alpha_hat = " << format_double(alpha_hat) << '\n';
    out << "lipschitz_c = " << format_double(report.lipschitz_c) << '\n';
    out << "epsilon = " << format_double(report.epsilon) << '\n';
    out << "epsilon_1 = " << format_double(report.eps1) << '\n';
    out << "epsilon_2 = " << format_double(report.eps2) << '\n';
    out << "beta = " << format_double(report.beta) << '\n';
    out << "beta_proof = " << format_double(report.beta_proof) << '\n';
    out << "tolerance = " << format_double(report.tolerance) << '\n';
    out << "clamp_count = " << report.clamp_count << '\n';
    for (const auto& [k, v] : config.flatten()) out << "config." << k << " = " << v << '\n';
    out << "iter,residual_beta,residual_sup,ratio\n";
    for (std::size_t k = 0; k < report.residuals_beta.size(); ++k) {
        out << (k + 1) << ',' << format_double(report.residuals_beta[k]) << ','
            << format_double(report.residuals_sup[k]) << ','
            << (k == 0 ? "" : format_double(report.ratios[k - 1])) << '\n';
    }
}

}  // namespace

void Scenario::run() {
    namespace fs = std::filesystem;
    evolution::CoefficientField coeffs = build_coefficients(config_);
    evolution::SpectralBasis basis(config_.modes);
    evolution::Propagator prop(coeffs, basis, config_.time_cells, config_.substeps_per_cell);
    ou::Engine engine(prop, config_.pinv_tol);
    fs::create_directories(config_.output_dir);

    const OuDiagnostics diag = write_ou_diagnostics(
        config_, engine, config_.output_dir + "/ou_diagnostics.csv");
    if (!quiet_)
        std::cerr << "ou diagnostics: " << diag.rows
                  << " triples, max embedding norm = " << format_double(diag.max_embedding)
                  << '\n';

    const ou::AlphaFit fit = ou::alpha_probe(coeffs, basis, config_.pinv_tol);
    const double alpha = resolve_alpha(config_, fit);

    hjb::PicardConfig pc;
    pc.alpha = alpha;
    pc.tolerance = config_.tolerance;
    pc.max_iterations = config_.max_iterations;
    pc.time_nodes = config_.time_nodes;
    pc.threads = config_.threads;
    pc.cubature = config_.cubature;
    pc.cubature.seed = config_.seed;
    pc.lattice_points = config_.lattice_points;
    pc.lattice_half_width = config_.lattice_half_width;

    const hjb::Terminal terminal = build_terminal(config_, config_.modes);
    const hjb::Hamiltonian ham = build_hamiltonian(config_, config_.modes);

    try {
        hjb::PicardResult result = hjb::picard_solve(terminal, ham, engine, pc);
        write_solution_csv(result.solution, config_.output_dir + "/solution.csv");
        write_report(config_, result.report, fit.alpha_hat,
                     config_.output_dir + "/report.txt");
        if (!quiet_)
            std::cerr << "solve: " << result.report.iterations << " iterations, converged="
                      << (result.report.converged ? "true" : "false") << '\n';
        if (!result.report.converged)
            throw NumericalError(tags::non_contraction,
                                 "picard_solve did not converge within max_iterations");
    } catch (const hjb::NonContractionError& e) {
        write_report(config_, e.report(), fit.alpha_hat, config_.output_dir + "/report.txt");
        throw;
    }
}

void Scenario::diagnose() {
    namespace fs = std::filesystem;
    evolution::CoefficientField coeffs = build_coefficients(config_);
    evolution::SpectralBasis basis(config_.modes);
    evolution::Propagator prop(coeffs, basis, config_.time_cells, config_.substeps_per_cell);
    ou::Engine engine(prop, config_.pinv_tol);
    fs::create_directories(config_.output_dir);

    DiagnoseOutcome outcome;
    auto record = [&outcome, this](const std::string& name, bool pass, double value,
                                   double bound, bool informational = false) {
        std::ostringstream os;
        os << "probe=" << name << " status="
           << (informational ? "info" : (pass ? "pass" : "fail"))
           << " value=" << format_double(value) << " bound=" << format_double(bound);
        outcome.lines.push_back(os.str());
        if (!informational && !pass) outcome.all_pass = false;
        if (!quiet_) std::cerr << outcome.lines.back() << '\n';
    };

    std::mt19937_64 rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    const int steps = prop.steps();
    std::uniform_int_distribution<int> pick(0, steps);

    // Evolution-family axioms: identity and composition on random triples.
    {
        double max_identity = 0.0;
        for (int i = 0; i <= steps; i += std::max(1, steps / 8))
            max_identity = std::max(
                max_identity, (prop.matrix_by_index(i, i) -
                               Eigen::MatrixXd::Identity(prop.dim(), prop.dim()))
                                  .norm());
        record("evolution_identity", max_identity == 0.0, max_identity, 0.0);

        double worst = 0.0;
        int done = 0;
        while (done < 50) {
            int i = pick(rng), j = pick(rng), k = pick(rng);
            int lo = std::min({i, j, k}), hi = std::max({i, j, k});
            int mid = i + j + k - lo - hi;
            if (lo > mid || mid > hi) continue;
            const Eigen::MatrixXd whole = prop.matrix_by_index(lo, hi);
            const Eigen::MatrixXd split =
                prop.matrix_by_index(mid, hi) * prop.matrix_by_index(lo, mid);
            worst = std::max(worst, spectral_norm(whole - split) / spectral_norm(whole));
            ++done;
        }
        record("evolution_composition", worst <= 1e-12, worst, 1e-12);
    }

    // Gramian additivity on nested triples.
    {
        double worst = 0.0;
        int done = 0;
        while (done < 50) {
            int i = pick(rng), j = pick(rng), k = pick(rng);
            int lo = std::min({i, j, k}), hi = std::max({i, j, k});
            int mid = i + j + k - lo - hi;
            if (lo == mid || mid == hi) continue;
            const double s = prop.grid()[lo], r = prop.grid()[mid], t = prop.grid()[hi];
            const Eigen::MatrixXd qts = engine.gramian(s, t).state.covariance();
            const Eigen::MatrixXd qtr = engine.gramian(r, t).state.covariance();
            const Eigen::MatrixXd qrs = engine.gramian(s, r).state.covariance();
            const Eigen::MatrixXd str = prop(r, t);
            const double err =
                (qts - (qtr + str * qrs * str.transpose())).norm() / qts.norm();
            worst = std::max(worst, err);
            ++done;
        }
        record("gramian_additivity", worst <= 1e-10, worst, 1e-10);
    }

    // Embedding norms (written to the diagnostics CSV as well).
    {
        const OuDiagnostics diag = write_ou_diagnostics(
            config_, engine, config_.output_dir + "/ou_diagnostics.csv");
        record("embedding_bound", diag.max_embedding <= 1.0 + 1e-8, diag.max_embedding,
               1.0 + 1e-8);
        // Full-rank truncations always sit strictly inside the unit ball;
        // reported for the record, never asserted.
        record("embedding_strict", true, diag.max_embedding, 1.0 - 1e-8,
               /*informational=*/true);
    }

    // Smoothing exponent fit on the scenario grid (informational value; the
    // span rule is enforced and surfaces as FIT_SPAN).
    {
        const auto pairs = evolution::fit_pairs_on_grid(prop);
        const ou::AlphaFit fit = engine.alpha_fit(pairs);
        record("alpha_fit", true, fit.alpha_hat, 1.0, /*informational=*/true);
    }

    // gamma-radonifying series table.
    {
        std::ofstream out(config_.output_dir + "/gamma_series.csv", std::ios::binary);
        if (!out)
            throw ConfigError(tags::io_error, "cannot write gamma_series.csv");
        out << "sigma,n,partial_sum,doubling_tail,converged\n";
        for (double sigma : config_.gamma_sigmas) {
            const auto d = gaussian::gamma_series_diagnostic(sigma, config_.gamma_n_max);
            const int ks[3] = {d.n_max / 4, d.n_max / 2, d.n_max};
            const double sums[3] = {d.sum_quarter, d.sum_half, d.sum_full};
            for (int row = 0; row < 3; ++row) {
                out << format_double(sigma) << ',' << ks[row] << ','
                    << format_double(sums[row]) << ',' << format_double(d.doubling_tail)
                    << ',' << (d.converged ? "true" : "false") << '\n';
            }
            record("gamma_series_sigma_" + format_double(sigma), true,
                   d.doubling_tail, 1e-4 * d.sum_full, /*informational=*/true);
        }
    }

    std::ofstream summary(config_.output_dir + "/summary.txt", std::ios::binary);
    if (!summary) throw ConfigError(tags::io_error, "cannot write summary.txt");
    for (const auto& line : outcome.lines) summary << line << '\n';
    summary << "all_pass = " << (outcome.all_pass ? "true" : "false") << '\n';
    summary.close();

    if (!outcome.all_pass)
        throw NumericalError("DIAGNOSTIC_FAIL", "one or more diagnostic probes failed");
}

}  // namespace mildhjb::scenario
