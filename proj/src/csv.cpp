#include "condscore/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace condscore {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw invalid_input("invalid number '" + s + "' in " + where);
    }
}

// Writes content to path atomically (temp file in the same directory, then
// rename).
void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw invalid_input("cannot open output file " + tmp);
        }
        os << content;
        if (!os) {
            throw numerical_error("write failed for " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw numerical_error("rename failed for " + path + ": " + std::strerror(errno));
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw invalid_input("cannot open input file " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

Grid parse_grid_header(const std::string& header, const std::string& path,
                       const std::string& label) {
    const auto fields = split(header);
    if (fields.empty() || fields[0] != label) {
        throw invalid_input(path + ": header must start with '" + label + "'");
    }
    if (fields.size() < 3) {
        throw invalid_input(path + ": header needs at least 2 grid points");
    }
    Eigen::VectorXd pts(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
        pts(j - 1) = parse_double(fields[j], path + " header column " + std::to_string(j + 1));
    }
    return Grid(std::move(pts));
}

Eigen::VectorXd parse_values(const std::vector<std::string>& fields, Eigen::Index m,
                             const std::string& path, std::size_t row) {
    if (static_cast<Eigen::Index>(fields.size()) - 1 != m) {
        throw invalid_input(path + " row " + std::to_string(row) + ": expected " +
                            std::to_string(m) + " values, got " +
                            std::to_string(fields.size() - 1));
    }
    Eigen::VectorXd v(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        v(j) = parse_double(fields[j + 1],
                            path + " row " + std::to_string(row) + " column " +
                                std::to_string(j + 2));
    }
    return v;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_curveset(const std::string& path, const CurveSet& curves) {
    std::ostringstream os;
    os << "t";
    for (Eigen::Index j = 0; j < curves.grid.points.size(); ++j) {
        os << ',' << format_double(curves.grid.points(j));
    }
    os << '\n';
    for (int i = 0; i < curves.count(); ++i) {
        os << "curve_" << i;
        for (Eigen::Index j = 0; j < curves.values.cols(); ++j) {
            os << ',' << format_double(curves.values(i, j));
        }
        os << '\n';
    }
    atomic_write(path, os.str());
}

CurveSet read_curveset(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) {
        throw invalid_input(path + ": empty file");
    }
    const Grid grid = parse_grid_header(lines[0], path, "t");
    const Eigen::Index m = grid.points.size();
    if (lines.size() < 2) {
        throw invalid_input(path + ": no curves");
    }
    Eigen::MatrixXd values(lines.size() - 1, m);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r]);
        if (fields.empty() || fields[0].rfind("curve_", 0) != 0) {
            throw invalid_input(path + " row " + std::to_string(r + 1) +
                                ": id must start with 'curve_'");
        }
        values.row(r - 1) = parse_values(fields, m, path, r + 1).transpose();
    }
    return CurveSet(grid, std::move(values));
}

void write_replicates(const std::string& path, const ReplicateSet& reps) {
    std::ostringstream os;
    os << "t";
    for (Eigen::Index j = 0; j < reps.grid.points.size(); ++j) {
        os << ',' << format_double(reps.grid.points(j));
    }
    os << '\n';
    for (int i = 0; i < reps.count(); ++i) {
        for (Eigen::Index l = 0; l < reps.subjects[i].rows(); ++l) {
            os << "curve_" << i << "_rep_" << l;
            for (Eigen::Index j = 0; j < reps.subjects[i].cols(); ++j) {
                os << ',' << format_double(reps.subjects[i](l, j));
            }
            os << '\n';
        }
    }
    atomic_write(path, os.str());
}

ReplicateSet read_replicates(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) {
        throw invalid_input(path + ": empty file");
    }
    const Grid grid = parse_grid_header(lines[0], path, "t");
    const Eigen::Index m = grid.points.size();
    // Group rows by subject id in order of first appearance.
    std::vector<std::string> order;
    std::map<std::string, std::vector<Eigen::VectorXd>> groups;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r]);
        if (fields.empty()) {
            continue;
        }
        const std::string& id = fields[0];
        const auto rep_pos = id.rfind("_rep_");
        if (id.rfind("curve_", 0) != 0 || rep_pos == std::string::npos) {
            throw invalid_input(path + " row " + std::to_string(r + 1) +
                                ": id must look like curve_<subject>_rep_<l>");
        }
        const std::string subject = id.substr(0, rep_pos);
        if (groups.find(subject) == groups.end()) {
            order.push_back(subject);
        }
        groups[subject].push_back(parse_values(fields, m, path, r + 1));
    }
    if (order.empty()) {
        throw invalid_input(path + ": no replicate rows");
    }
    std::vector<Eigen::MatrixXd> subjects;
    subjects.reserve(order.size());
    for (const auto& subject : order) {
        const auto& rows = groups[subject];
        if (rows.size() < 2) {
            throw invalid_input(path + ": subject '" + subject +
                                "' has fewer than 2 replicates");
        }
        Eigen::MatrixXd mat(rows.size(), m);
        for (std::size_t l = 0; l < rows.size(); ++l) {
            mat.row(l) = rows[l].transpose();
        }
        subjects.push_back(std::move(mat));
    }
    return ReplicateSet(grid, std::move(subjects));
}

void write_response(const std::string& path, const Eigen::VectorXd& y) {
    std::ostringstream os;
    os << "y\n";
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        os << format_double(y(i)) << '\n';
    }
    atomic_write(path, os.str());
}

Eigen::VectorXd read_response(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines[0] != "y") {
        throw invalid_input(path + ": response file must start with header 'y'");
    }
    Eigen::VectorXd y(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        y(r - 1) = parse_double(lines[r], path + " row " + std::to_string(r + 1));
    }
    return y;
}

void write_eigenbasis(const std::string& path, const EigenBasis& eb) {
    std::ostringstream os;
    os << "lambda";
    for (Eigen::Index j = 0; j < eb.basis.grid.points.size(); ++j) {
        os << ',' << format_double(eb.basis.grid.points(j));
    }
    os << '\n';
    for (int k = 0; k < eb.size(); ++k) {
        os << format_double(eb.eigenvalues(k));
        for (Eigen::Index j = 0; j < eb.basis.functions.cols(); ++j) {
            os << ',' << format_double(eb.basis.functions(k, j));
        }
        os << '\n';
    }
    atomic_write(path, os.str());
}

EigenBasis read_eigenbasis(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) {
        throw invalid_input(path + ": empty file");
    }
    const Grid grid = parse_grid_header(lines[0], path, "lambda");
    const Eigen::Index m = grid.points.size();
    if (lines.size() < 2) {
        throw invalid_input(path + ": no eigenfunctions");
    }
    Eigen::VectorXd evals(lines.size() - 1);
    Eigen::MatrixXd funcs(lines.size() - 1, m);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r]);
        evals(r - 1) = parse_double(fields.empty() ? "" : fields[0],
                                    path + " row " + std::to_string(r + 1));
        funcs.row(r - 1) = parse_values(fields, m, path, r + 1).transpose();
    }
    EigenBasis eb;
    eb.basis = Basis(grid, std::move(funcs), false);
    eb.eigenvalues = std::move(evals);
    return eb;
}

void write_cumulative_variance(const std::string& path, const Eigen::VectorXd& variances) {
    std::ostringstream os;
    os << "k,cumulative_fraction\n";
    const double total = variances.sum();
    double cum = 0.0;
    for (Eigen::Index k = 0; k < variances.size(); ++k) {
        cum += variances(k);
        os << (k + 1) << ',' << format_double(total > 0.0 ? cum / total : 0.0) << '\n';
    }
    atomic_write(path, os.str());
}

void write_fit_result(const std::string& path, const FitResult& fit) {
    std::ostringstream os;
    os << "key,value\n";
    os << "beta0," << format_double(fit.coef.beta0) << '\n';
    if (fit.sigma2.has_value()) {
        os << "sigma2," << format_double(*fit.sigma2) << '\n';
    }
    os << "converged," << (fit.converged ? 1 : 0) << '\n';
    os << "iterations," << fit.iterations << '\n';
    os << "final_residual," << format_double(fit.final_residual) << '\n';
    os << "pn," << fit.pn << '\n';
    for (Eigen::Index k = 0; k < fit.coef.beta.size(); ++k) {
        os << "coef_" << (k + 1) << ',' << format_double(fit.coef.beta(k)) << '\n';
    }
    if (fit.slope.values.size() > 0) {
        os << "t";
        for (Eigen::Index j = 0; j < fit.slope.grid.points.size(); ++j) {
            os << ',' << format_double(fit.slope.grid.points(j));
        }
        os << '\n';
        os << "slope";
        for (Eigen::Index j = 0; j < fit.slope.values.size(); ++j) {
            os << ',' << format_double(fit.slope.values(j));
        }
        os << '\n';
    }
    atomic_write(path, os.str());
}

void write_results(const std::string& path, const std::vector<MCResultRow>& rows) {
    std::ostringstream os;
    os << "scenario_id,family,setting,n,noise,length_scale,reps,mean_pn,mean_E_n,mean_E_co,"
          "failures\n";
    for (const auto& row : rows) {
        os << row.scenario_id << ',' << family_name(row.family) << ',' << setting_name(row.setting)
           << ',' << row.n << ',' << format_double(row.noise) << ','
           << format_double(row.length_scale) << ',' << row.reps << ','
           << format_double(row.mean_pn) << ',' << format_double(row.mean_E_n) << ','
           << format_double(row.mean_E_co) << ',' << row.failures << '\n';
    }
    atomic_write(path, os.str());
}

void write_inject_report(const std::string& path, const InjectReport& report) {
    std::ostringstream os;
    os << "key,value\n";
    os << "E_n," << format_double(report.E_n) << '\n';
    os << "E_co," << format_double(report.E_co) << '\n';
    os << "pn," << report.pn << '\n';
    os << "t";
    for (Eigen::Index j = 0; j < report.reference_slope.grid.points.size(); ++j) {
        os << ',' << format_double(report.reference_slope.grid.points(j));
    }
    os << '\n';
    const auto emit = [&os](const char* name, const Curve& c) {
        os << name;
        for (Eigen::Index j = 0; j < c.values.size(); ++j) {
            os << ',' << format_double(c.values(j));
        }
        os << '\n';
    };
    emit("curve_reference", report.reference_slope);
    emit("curve_naive", report.naive_slope);
    emit("curve_corrected", report.corrected_slope);
    atomic_write(path, os.str());
}

}  // namespace condscore
