#include "vbnn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vbnn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n\"");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, char delimiter) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, delimiter)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delimiter) out.emplace_back();
    return out;
}

}  // namespace

Table read_csv(const std::string& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
    t.header = split_line(line, delimiter);
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line, delimiter);
        if (cells.size() != t.header.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(t.header.size()) + " fields");
        std::vector<double> row;
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (c.empty() || used != c.size() || !std::isfinite(v))
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing or non-numeric value '" + c +
                                         "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(i, j) = rows[i][j];
    return t;
}

Dataset load_dataset(const std::string& path, const std::vector<std::string>& targets, char delimiter) {
    const Table t = read_csv(path, delimiter);
    if (targets.empty()) throw std::invalid_argument("no target column given");
    std::vector<int> tcols, fcols;
    for (const auto& name : targets) {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end()) throw std::invalid_argument("target column '" + name + "' not found in " + path);
        tcols.push_back(static_cast<int>(it - t.header.begin()));
    }
    std::vector<std::string> fnames;
    for (int j = 0; j < static_cast<int>(t.header.size()); ++j)
        if (std::find(tcols.begin(), tcols.end(), j) == tcols.end()) {
            fcols.push_back(j);
            fnames.push_back(t.header[j]);
        }
    if (fcols.empty()) throw std::invalid_argument("no input columns left after removing targets");
    if (t.values.rows() == 0) throw std::invalid_argument(path + " has no data rows");
    return make_dataset(t.values(Eigen::all, fcols), t.values(Eigen::all, tcols), fnames, targets);
}

Normalization fit_normalization(const Eigen::MatrixXd& X_raw) {
    Normalization norm;
    const double n = static_cast<double>(X_raw.rows());
    norm.mean = X_raw.colwise().mean().transpose();
    norm.sd.resize(X_raw.cols());
    for (Eigen::Index j = 0; j < X_raw.cols(); ++j) {
        const double var = (X_raw.col(j).array() - norm.mean(j)).square().sum() / std::max(1.0, n - 1.0);
        norm.sd(j) = std::sqrt(var);
        if (!(norm.sd(j) > 0.0)) {
            std::cerr << "warning: input column " << j << " is constant; using unit scale\n";
            norm.sd(j) = 1.0;
        }
    }
    return norm;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd& X_raw, const Normalization& norm) {
    if (X_raw.cols() != norm.mean.size()) throw std::invalid_argument("normalization does not match input width");
    return (X_raw.rowwise() - norm.mean.transpose()).array().rowwise() / norm.sd.transpose().array();
}

Dataset make_dataset(const Eigen::MatrixXd& X_raw, const Eigen::MatrixXd& Y, const Normalization& norm,
                     std::vector<std::string> feature_names, std::vector<std::string> target_names) {
    if (X_raw.rows() != Y.rows()) throw std::invalid_argument("inputs and targets have different row counts");
    Dataset d;
    d.X_raw = X_raw;
    d.Y = Y;
    d.norm = norm;
    d.X = normalize(X_raw, norm);
    if (feature_names.empty())
        for (Eigen::Index j = 0; j < X_raw.cols(); ++j) feature_names.push_back("x" + std::to_string(j + 1));
    if (target_names.empty())
        for (Eigen::Index j = 0; j < Y.cols(); ++j) target_names.push_back("y" + std::to_string(j + 1));
    d.feature_names = std::move(feature_names);
    d.target_names = std::move(target_names);
    return d;
}

Dataset make_dataset(const Eigen::MatrixXd& X_raw, const Eigen::MatrixXd& Y, std::vector<std::string> feature_names,
                     std::vector<std::string> target_names) {
    return make_dataset(X_raw, Y, fit_normalization(X_raw), std::move(feature_names), std::move(target_names));
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_frac, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
    const int n = data.size();
    const int n_train = static_cast<int>(std::floor(train_frac * n + 0.5));
    if (n_train < 1 || n_train >= n) throw std::invalid_argument("split leaves an empty part");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(idx[i], idx[pick(rng)]);
    }
    const std::vector<int> tr(idx.begin(), idx.begin() + n_train);
    const std::vector<int> te(idx.begin() + n_train, idx.end());
    const Eigen::MatrixXd Xtr = data.X_raw(tr, Eigen::all);
    const Normalization norm = fit_normalization(Xtr);
    return {make_dataset(Xtr, data.Y(tr, Eigen::all), norm, data.feature_names, data.target_names),
            make_dataset(data.X_raw(te, Eigen::all), data.Y(te, Eigen::all), norm, data.feature_names,
                         data.target_names)};
}

Dataset simulate_toy(int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("simulate_toy: n must be positive");
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::normal_distribution<double> noise(0.0, std::sqrt(0.5));
    Eigen::MatrixXd X(n, 2), Y(n, 1);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = u(rng);
        X(i, 1) = u(rng);
        Y(i, 0) = 0.1 * X(i, 0) * X(i, 0) + 10.0 * std::sin(X(i, 0)) + noise(rng);
    }
    return make_dataset(X, Y, {"x1", "x2"}, {"y"});
}

Metrics evaluate(const std::vector<PredictiveSummary>& preds, const Eigen::MatrixXd& Y, double level) {
    if (static_cast<Eigen::Index>(preds.size()) != Y.rows()) throw std::invalid_argument("evaluate: size mismatch");
    Metrics m;
    m.level = level;
    m.n = static_cast<int>(Y.rows());
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double se = 0.0, nll = 0.0, hit = 0.0;
    const Eigen::Index D = Y.cols();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Interval ci = credible_interval(preds[i], level);
        for (Eigen::Index d = 0; d < D; ++d) {
            const double r = Y(i, d) - preds[i].mean(d);
            const double v = preds[i].variance(d);
            se += r * r;
            nll += 0.5 * (log2pi + std::log(v) + r * r / v);
            if (Y(i, d) >= ci.lo(d) && Y(i, d) <= ci.hi(d)) hit += 1.0;
        }
    }
    const double cnt = static_cast<double>(preds.size() * D);
    m.rmse = std::sqrt(se / cnt);
    m.nll = nll / cnt;
    m.coverage = hit / cnt;
    return m;
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string predictions_csv(const std::vector<PredictiveSummary>& preds, double level) {
    std::ostringstream os;
    os << std::setprecision(17);
    const Eigen::Index D = preds.empty() ? 0 : preds.front().mean.size();
    os << "index";
    for (Eigen::Index d = 0; d < D; ++d) os << ",mean_" << d << ",sd_" << d << ",lo_" << d << ",hi_" << d;
    os << "\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Interval ci = credible_interval(preds[i], level);
        os << i;
        for (Eigen::Index d = 0; d < D; ++d)
            os << ',' << preds[i].mean(d) << ',' << std::sqrt(preds[i].variance(d)) << ',' << ci.lo(d) << ','
               << ci.hi(d);
        os << "\n";
    }
    return os.str();
}

std::string table_csv(const Table& t) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t j = 0; j < t.header.size(); ++j) os << (j ? "," : "") << t.header[j];
    os << "\n";
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.values.cols(); ++j) os << (j ? "," : "") << t.values(i, j);
        os << "\n";
    }
    return os.str();
}

}  // namespace vbnn
