// Command-line front end: scenario simulation, dataset estimation, basis
// export, and error-injection workflows. See README for config and file
// formats. Exit codes: 0 success, 2 input/config error, 3 internal failure,
// 4 estimation non-convergence (output still written).

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "condscore/csv.hpp"
#include "condscore/sim.hpp"

namespace cs = condscore;

namespace {

// ---------------------------------------------------------------------------
// Sectioned key=value configuration.

using Section = std::map<std::string, std::string>;
using Config = std::map<std::string, Section>;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

Config parse_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw cs::invalid_input("cannot open config file " + path);
    }
    Config cfg;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            cfg[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || section.empty()) {
            throw cs::invalid_input(path + " line " + std::to_string(lineno) +
                                    ": expected 'key = value' inside a [section]");
        }
        cfg[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

// Tracks which keys were consumed so unknown keys can be rejected.
class ConfigReader {
  public:
    ConfigReader(Config cfg, std::string path) : cfg_(std::move(cfg)), path_(std::move(path)) {}

    std::optional<std::string> get(const std::string& section, const std::string& key) {
        used_[section].insert(key);
        const auto sit = cfg_.find(section);
        if (sit == cfg_.end()) {
            return std::nullopt;
        }
        const auto kit = sit->second.find(key);
        if (kit == sit->second.end()) {
            return std::nullopt;
        }
        return kit->second;
    }

    std::string require(const std::string& section, const std::string& key) {
        auto v = get(section, key);
        if (!v) {
            throw cs::invalid_input(path_ + ": missing required key '" + key + "' in [" +
                                    section + "]");
        }
        return *v;
    }

    double get_double(const std::string& section, const std::string& key, double dflt) {
        const auto v = get(section, key);
        return v ? parse_num(section, key, *v) : dflt;
    }

    long get_long(const std::string& section, const std::string& key, long dflt) {
        const auto v = get(section, key);
        if (!v) {
            return dflt;
        }
        const double d = parse_num(section, key, *v);
        return static_cast<long>(d);
    }

    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 std::vector<double> dflt) {
        const auto v = get(section, key);
        if (!v) {
            return dflt;
        }
        std::vector<double> out;
        std::string item;
        std::istringstream is(*v);
        while (std::getline(is, item, ',')) {
            out.push_back(parse_num(section, key, trim(item)));
        }
        if (out.empty()) {
            throw cs::invalid_input(path_ + ": empty list for key '" + key + "'");
        }
        return out;
    }

    void reject_unknown() const {
        static const std::set<std::string> known_sections = {"scenario", "solver", "selection",
                                                             "io"};
        for (const auto& [section, keys] : cfg_) {
            if (known_sections.find(section) == known_sections.end()) {
                throw cs::invalid_input(path_ + ": unknown section [" + section + "]");
            }
            const auto uit = used_.find(section);
            for (const auto& [key, value] : keys) {
                if (uit == used_.end() || uit->second.find(key) == uit->second.end()) {
                    throw cs::invalid_input(path_ + ": unknown key '" + key + "' in [" + section +
                                            "]");
                }
            }
        }
    }

  private:
    double parse_num(const std::string& section, const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size()) {
                throw std::invalid_argument("trailing characters");
            }
            return d;
        } catch (const std::exception&) {
            throw cs::invalid_input(path_ + ": invalid numeric value '" + v + "' for key '" +
                                    key + "' in [" + section + "]");
        }
    }

    Config cfg_;
    std::string path_;
    std::map<std::string, std::set<std::string>> used_;
};

cs::Family parse_family(const std::string& v) {
    if (v == "gaussian") {
        return cs::Family::gaussian;
    }
    if (v == "binary") {
        return cs::Family::binary;
    }
    throw cs::invalid_input("family must be 'gaussian' or 'binary', got '" + v + "'");
}

cs::Setting parse_setting(const std::string& v) {
    if (v == "sqexp") {
        return cs::Setting::sqexp;
    }
    if (v == "brownian_bridge") {
        return cs::Setting::brownian_bridge;
    }
    throw cs::invalid_input("setting must be 'sqexp' or 'brownian_bridge', got '" + v + "'");
}

cs::PipelineOptions read_pipeline_options(ConfigReader& cfg) {
    cs::PipelineOptions opt;
    opt.newton.tol = cfg.get_double("solver", "tol", opt.newton.tol);
    opt.newton.max_iter = static_cast<int>(cfg.get_long("solver", "max_iter", opt.newton.max_iter));
    opt.newton.max_halvings =
        static_cast<int>(cfg.get_long("solver", "max_halvings", opt.newton.max_halvings));
    opt.newton.jacobian_ridge =
        cfg.get_double("solver", "jacobian_ridge", opt.newton.jacobian_ridge);
    opt.outer_max = static_cast<int>(cfg.get_long("solver", "outer_max", opt.outer_max));
    opt.epsilon = cfg.get_double("selection", "epsilon", opt.epsilon);
    opt.cap = static_cast<int>(cfg.get_long("selection", "cap", opt.cap));
    if (const auto mode = cfg.get("selection", "mode")) {
        if (*mode == "signal") {
            opt.selection = cs::SelectionMode::signal;
        } else if (*mode == "observed") {
            opt.selection = cs::SelectionMode::observed;
        } else {
            throw cs::invalid_input("selection mode must be 'signal' or 'observed'");
        }
    }
    if (const auto basis = cfg.get("selection", "basis")) {
        if (*basis == "observed") {
            opt.basis_source = cs::BasisSource::observed;
        } else if (*basis == "error") {
            opt.basis_source = cs::BasisSource::error;
        } else {
            throw cs::invalid_input("selection basis must be 'observed' or 'error'");
        }
    }
    return opt;
}

struct GlobalFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string dump_data;
};

std::string resolve_out(ConfigReader& cfg, const GlobalFlags& flags) {
    if (!flags.out.empty()) {
        cfg.get("io", "out");  // mark consumed even when overridden
        return flags.out;
    }
    return cfg.require("io", "out");
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_simulate(const GlobalFlags& flags) {
    ConfigReader cfg(parse_config(flags.config), flags.config);
    const cs::Family family = parse_family(cfg.require("scenario", "family"));
    const cs::Setting setting = parse_setting(cfg.require("scenario", "setting"));
    const std::vector<double> ns = cfg.get_list("scenario", "n", {});
    const std::vector<double> noises = cfg.get_list("scenario", "noise", {});
    std::vector<double> lengths = {0.0};
    if (setting == cs::Setting::sqexp) {
        lengths = cfg.get_list("scenario", "length_scale", {});
    } else {
        cfg.get("scenario", "length_scale");
    }
    cs::SimScenario base;
    base.family = family;
    base.setting = setting;
    base.reps = static_cast<int>(cfg.get_long("scenario", "reps", 50));
    base.replicates_per_subject =
        static_cast<int>(cfg.get_long("scenario", "replicates_per_subject", 50));
    base.grid_size = static_cast<int>(cfg.get_long("scenario", "grid_size", 101));
    base.seed = flags.seed.value_or(
        static_cast<std::uint64_t>(cfg.get_long("scenario", "seed", 1)));
    if (flags.seed) {
        cfg.get("scenario", "seed");
    }
    if (const auto link = cfg.get("scenario", "binary_link")) {
        if (*link == "linear_logit") {
            base.binary_link = cs::BinaryLink::linear_logit;
        } else if (*link == "max_curve") {
            base.binary_link = cs::BinaryLink::max_curve;
        } else {
            throw cs::invalid_input("binary_link must be 'linear_logit' or 'max_curve'");
        }
    }
    if (const auto rnd = cfg.get("scenario", "p_rounding")) {
        if (*rnd == "nearest") {
            base.p_rounding = cs::PRounding::nearest;
        } else if (*rnd == "floor") {
            base.p_rounding = cs::PRounding::floor;
        } else {
            throw cs::invalid_input("p_rounding must be 'nearest' or 'floor'");
        }
    }
    base.pipeline = read_pipeline_options(cfg);
    const std::string out = resolve_out(cfg, flags);
    cfg.reject_unknown();

    std::vector<cs::MCResultRow> rows;
    int idx = 0;
    for (const double n : ns) {
        for (const double noise : noises) {
            for (const double l : lengths) {
                cs::SimScenario s = base;
                s.n = static_cast<int>(n);
                s.noise = noise;
                s.length_scale = l;
                s.validate();
                ++idx;
                cs::MCResultRow row = cs::run_scenario(s, flags.threads);
                row.scenario_id = "s" + std::to_string(idx);
                std::cout << row.scenario_id << ": " << cs::family_name(s.family) << " "
                          << cs::setting_name(s.setting) << " n=" << s.n << " noise=" << s.noise
                          << (s.setting == cs::Setting::sqexp
                                  ? " l=" + std::to_string(s.length_scale)
                                  : std::string())
                          << " mean_pn=" << row.mean_pn << " E_n=" << row.mean_E_n
                          << " E_co=" << row.mean_E_co << " failures=" << row.failures << "\n";
                if (!flags.dump_data.empty()) {
                    // Regenerate replication 0 of this scenario and write it
                    // out so `estimate` can reproduce the fit from files.
                    namespace fs = std::filesystem;
                    const fs::path dir =
                        fs::path(flags.dump_data) / ("scenario_" + std::to_string(idx));
                    fs::create_directories(dir);
                    const cs::Grid grid = cs::uniform_grid(s.grid_size);
                    const cs::CovKernel kernel =
                        s.setting == cs::Setting::sqexp
                            ? cs::sqexp_kernel(s.noise, s.length_scale, grid)
                            : cs::brownian_bridge_kernel(s.noise, grid);
                    const cs::GpSampler sampler(kernel);
                    cs::Rng rng(s.seed, 0);
                    auto [X, p] = cs::generate_covariates(s.n, grid, rng, s.p_rounding);
                    Eigen::MatrixXd u(s.n, s.grid_size);
                    sampler.draw_into(u, rng);
                    const cs::CurveSet W(grid, X.values + u);
                    std::vector<Eigen::MatrixXd> subjects(s.n);
                    for (int i = 0; i < s.n; ++i) {
                        subjects[i].resize(s.replicates_per_subject, s.grid_size);
                        sampler.draw_into(subjects[i], rng);
                    }
                    const cs::ReplicateSet reps(grid, std::move(subjects));
                    const auto [slope, coefs] = cs::generate_slope(p, grid);
                    const Eigen::VectorXd y = cs::generate_responses(
                        X, slope, s.family, rng,
                        s.family == cs::Family::binary ? s.binary_link
                                                       : cs::BinaryLink::linear_logit);
                    cs::write_curveset((dir / "curves.csv").string(), W);
                    cs::write_replicates((dir / "replicates.csv").string(), reps);
                    cs::write_response((dir / "response.csv").string(), y);
                    const cs::PipelineResult fit =
                        cs::estimate_pipeline(W, reps, y, s.family, s.pipeline);
                    cs::write_fit_result((dir / "fit.csv").string(), fit.corrected);
                }
                rows.push_back(std::move(row));
            }
        }
    }
    cs::write_results(out, rows);
    return 0;
}

int cmd_estimate(const GlobalFlags& flags, const std::string& curves_path,
                 const std::string& replicates_path, const std::string& response_path) {
    ConfigReader cfg(parse_config(flags.config), flags.config);
    const cs::Family family = parse_family(cfg.require("scenario", "family"));
    const cs::PipelineOptions opt = read_pipeline_options(cfg);
    const std::string out = resolve_out(cfg, flags);
    cfg.reject_unknown();

    const cs::CurveSet curves = cs::read_curveset(curves_path);
    const cs::ReplicateSet reps = cs::read_replicates(replicates_path);
    const Eigen::VectorXd y = cs::read_response(response_path);
    if (y.size() != curves.count()) {
        throw cs::invalid_input("response length (" + std::to_string(y.size()) +
                                ") does not match curve count (" +
                                std::to_string(curves.count()) + ")");
    }
    if (reps.count() != curves.count()) {
        throw cs::invalid_input("replicate subject count (" + std::to_string(reps.count()) +
                                ") does not match curve count (" +
                                std::to_string(curves.count()) + ")");
    }
    const cs::PipelineResult fit = cs::estimate_pipeline(curves, reps, y, family, opt);
    cs::write_fit_result(out, fit.corrected);
    cs::write_fit_result(out + ".naive.csv", fit.naive);
    {
        std::ostringstream diag;
        diag << "selected_pn: " << fit.pn << "\n"
             << "converged: " << (fit.corrected.converged ? 1 : 0) << "\n"
             << "iterations: " << fit.corrected.iterations << "\n"
             << "final_residual: " << fit.corrected.final_residual << "\n"
             << fit.diagnostics.report();
        std::ofstream os(out + ".diagnostics.txt");
        os << diag.str();
        std::cout << diag.str();
    }
    return fit.corrected.converged ? 0 : 4;
}

int cmd_basis(const GlobalFlags& flags, const std::string& replicates_path) {
    const std::string out = flags.out.empty() ? "eigenbasis.csv" : flags.out;
    const cs::ReplicateSet reps = cs::read_replicates(replicates_path);
    const cs::CovKernel khat = cs::estimate_error_kernel(reps);
    const int cap = std::min<int>(20, khat.grid.size() - 1);
    const cs::EigenBasis eb = cs::eigen_decompose(khat, cap);
    if (eb.eigenvalues.maxCoeff() <= 0.0) {
        std::cerr << "warning: all eigenvalues are zero (no within-subject variation)\n";
    }
    cs::write_eigenbasis(out, eb);
    cs::write_cumulative_variance(out + ".cumvar.csv", eb.eigenvalues);
    std::cout << "wrote " << eb.size() << " eigenpairs to " << out << "\n";
    return 0;
}

int cmd_inject(const GlobalFlags& flags, const std::string& curves_path,
               const std::string& response_path) {
    ConfigReader cfg(parse_config(flags.config), flags.config);
    const cs::Setting setting = parse_setting(cfg.require("scenario", "setting"));
    const double noise = cfg.get_double("scenario", "noise", -1.0);
    if (!(noise > 0.0)) {
        throw cs::invalid_input("inject: key 'noise' in [scenario] must be positive");
    }
    double length_scale = 0.0;
    if (setting == cs::Setting::sqexp) {
        length_scale = cfg.get_double("scenario", "length_scale", -1.0);
        if (!(length_scale > 0.0)) {
            throw cs::invalid_input("inject: key 'length_scale' in [scenario] must be positive");
        }
    }
    const int reps_per_subject =
        static_cast<int>(cfg.get_long("scenario", "replicates_per_subject", 50));
    const std::uint64_t seed =
        flags.seed.value_or(static_cast<std::uint64_t>(cfg.get_long("scenario", "seed", 1)));
    if (flags.seed) {
        cfg.get("scenario", "seed");
    }
    const cs::PipelineOptions opt = read_pipeline_options(cfg);
    const std::string out = resolve_out(cfg, flags);
    cfg.reject_unknown();

    const cs::CurveSet clean = cs::read_curveset(curves_path);
    const Eigen::VectorXd y = cs::read_response(response_path);
    const cs::CovKernel kernel = setting == cs::Setting::sqexp
                                     ? cs::sqexp_kernel(noise, length_scale, clean.grid)
                                     : cs::brownian_bridge_kernel(noise, clean.grid);
    cs::Rng rng(seed);
    const cs::InjectReport report =
        cs::inject_and_fit(clean, y, kernel, reps_per_subject, rng, opt);
    cs::write_inject_report(out, report);
    std::cout << "E_n=" << report.E_n << " E_co=" << report.E_co << " pn=" << report.pn << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional-score estimation for functional GLMs with measurement error"};
    app.require_subcommand(1);

    GlobalFlags flags;
    std::string curves_path;
    std::string replicates_path;
    std::string response_path;

    auto add_common = [&flags](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", flags.config, "config file path");
        if (needs_config) {
            c->required();
        }
        sub->add_option("--out", flags.out, "output path (overrides [io] out)");
        sub->add_option("--seed", flags.seed, "seed override");
        sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::Range(1, 256));
    };

    auto* simulate = app.add_subcommand("simulate", "run Monte Carlo scenarios");
    add_common(simulate, true);
    simulate->add_option("--dump-data", flags.dump_data,
                         "directory for replication-0 datasets");

    auto* estimate = app.add_subcommand("estimate", "fit a dataset from files");
    add_common(estimate, true);
    estimate->add_option("--curves", curves_path, "observed curves CSV")->required();
    estimate->add_option("--replicates", replicates_path, "replicates CSV")->required();
    estimate->add_option("--response", response_path, "response CSV")->required();

    auto* basis = app.add_subcommand("basis", "export the error-covariance eigenbasis");
    add_common(basis, false);
    basis->add_option("--replicates", replicates_path, "replicates CSV")->required();

    auto* inject = app.add_subcommand("inject", "error-injection protocol on clean curves");
    add_common(inject, true);
    inject->add_option("--curves", curves_path, "clean curves CSV")->required();
    inject->add_option("--response", response_path, "response CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            return cmd_simulate(flags);
        }
        if (estimate->parsed()) {
            return cmd_estimate(flags, curves_path, replicates_path, response_path);
        }
        if (basis->parsed()) {
            return cmd_basis(flags, replicates_path);
        }
        if (inject->parsed()) {
            return cmd_inject(flags, curves_path, response_path);
        }
    } catch (const cs::invalid_input& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
