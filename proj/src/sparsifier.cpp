#include "vbnn/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace vbnn {

int SparseMask::kept_edges() const {
    int n = 0;
    for (const auto& k : keep) n += static_cast<int>(k.count());
    return n;
}

int SparseMask::total_edges() const {
    int n = 0;
    for (const auto& k : keep) n += static_cast<int>(k.size());
    return n;
}

std::vector<Eigen::MatrixXd> weight_scores(const GlobalVariational& g) {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& wl : g.layers) {
        Eigen::MatrixXd q(wl.rows(), wl.inputs());
        for (int d = 0; d < wl.rows(); ++d)
            for (int j = 0; j < wl.inputs(); ++j) {
                const double sd = std::sqrt(wl.cov[d](j + 1, j + 1));
                q(d, j) = sd > 0.0 ? normal_cdf(std::abs(wl.mean[d](j + 1)) / sd) : 1.0;
            }
        out.push_back(std::move(q));
    }
    return out;
}

double fdr_estimate(const std::vector<double>& scores, double kappa) {
    double miss = 0.0;
    int n = 0;
    for (double q : scores)
        if (q > kappa) {
            miss += 1.0 - q;
            ++n;
        }
    return n == 0 ? 0.0 : miss / n;
}

Threshold select_threshold(const std::vector<double>& scores, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("FDR target alpha must lie in (0, 1)");
    std::vector<double> q(scores);
    std::sort(q.begin(), q.end(), std::greater<>());
    Threshold t;
    double miss = 0.0;
    std::size_t i = 0;
    while (i < q.size()) {
        const double v = q[i];
        double group = 0.0;
        std::size_t j = i;
        for (; j < q.size() && q[j] == v; ++j) group += 1.0 - q[j];
        if (!((miss + group) / static_cast<double>(j) < alpha)) break;
        miss += group;
        t.kappa = v;
        t.empty = false;
        i = j;
    }
    return t;
}

SparseMask select_from_scores(const std::vector<Eigen::MatrixXd>& scores, double alpha) {
    std::vector<double> flat;
    for (const auto& s : scores) flat.insert(flat.end(), s.data(), s.data() + s.size());
    const Threshold t = select_threshold(flat, alpha);
    SparseMask mask;
    mask.alpha = alpha;
    mask.kappa = t.kappa;
    for (const auto& s : scores) {
        BoolMatrix k = s.array() >= t.kappa;
        if (t.empty) k.setConstant(false);
        mask.keep.push_back(std::move(k));
    }
    structural_prune(mask);
    return mask;
}

SparseMask select_nodes(const GlobalVariational& g, double alpha) { return select_from_scores(weight_scores(g), alpha); }

void structural_prune(SparseMask& mask) {
    const int hidden = static_cast<int>(mask.keep.size()) - 1;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int l = 0; l < hidden; ++l) {
            BoolMatrix& in = mask.keep[l];
            BoolMatrix& out = mask.keep[l + 1];
            for (Eigen::Index d = 0; d < in.rows(); ++d) {
                const bool has_in = in.row(d).any();
                const bool has_out = out.col(d).any();
                if (has_in != has_out) {
                    in.row(d).setConstant(false);
                    out.col(d).setConstant(false);
                    changed = true;
                }
            }
        }
    }
    mask.node_alive.assign(hidden, {});
    for (int l = 0; l < hidden; ++l)
        for (Eigen::Index d = 0; d < mask.keep[l].rows(); ++d) mask.node_alive[l].push_back(mask.keep[l].row(d).any());
}

std::vector<std::vector<int>> alive_nodes(const SparseMask& mask) {
    std::vector<std::vector<int>> out;
    for (const auto& layer : mask.node_alive) {
        std::vector<int> idx;
        for (std::size_t d = 0; d < layer.size(); ++d)
            if (layer[d]) idx.push_back(static_cast<int>(d));
        out.push_back(std::move(idx));
    }
    return out;
}

GlobalVariational apply_mask(const GlobalVariational& g, const SparseMask& mask, bool compact) {
    if (mask.keep.size() != g.layers.size()) throw std::invalid_argument("mask does not match the network");
    for (std::size_t k = 0; k < g.layers.size(); ++k)
        if (mask.keep[k].rows() != g.layers[k].rows() || mask.keep[k].cols() != g.layers[k].inputs())
            throw std::invalid_argument("mask does not match the network");

    GlobalVariational out = g;
    for (std::size_t k = 0; k < g.layers.size(); ++k) {
        WeightLayer& wl = out.layers[k];
        for (int d = 0; d < wl.rows(); ++d)
            for (int j = 0; j < wl.inputs(); ++j)
                if (!mask.keep[k](d, j)) {
                    wl.mean[d](j + 1) = 0.0;
                    wl.cov[d].row(j + 1).setZero();
                    wl.cov[d].col(j + 1).setZero();
                }
    }
    if (!compact) return out;

    const auto alive = alive_nodes(mask);
    const int L = g.depth();
    auto all = [](int n) {
        std::vector<int> v(n);
        for (int i = 0; i < n; ++i) v[i] = i;
        return v;
    };
    for (int k = 0; k <= L; ++k) {
        const WeightLayer& src = out.layers[k];
        const std::vector<int> rows = k < L ? alive[k] : all(src.rows());
        const std::vector<int> cols = k > 0 ? alive[k - 1] : all(src.inputs());
        std::vector<int> aug{0};
        for (int j : cols) aug.push_back(j + 1);
        WeightLayer dst;
        dst.tau = src.tau;
        dst.psi_nu = src.psi_nu;
        dst.psi_lam = src.psi_lam;
        dst.psi_delta = src.psi_delta(rows, cols);
        for (int d : rows) {
            dst.mean.push_back(src.mean[d](aug));
            dst.cov.push_back(src.cov[d](aug, aug));
            dst.noise.push_back(src.noise[d]);
        }
        out.layers[k] = std::move(dst);
    }
    return out;
}

SparseMask full_mask(const GlobalVariational& g) {
    SparseMask m;
    for (const auto& wl : g.layers) m.keep.push_back(BoolMatrix::Constant(wl.rows(), wl.inputs(), true));
    m.kappa = 0.0;
    structural_prune(m);
    return m;
}

std::string mask_to_dot(const SparseMask& mask, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    std::ostringstream os;
    auto node = [&](std::size_t layer, Eigen::Index i) {
        std::ostringstream n;
        if (layer == 0 && static_cast<std::size_t>(i) < inputs.size()) {
            n << '"' << inputs[i] << '"';
        } else if (layer == mask.keep.size() && static_cast<std::size_t>(i) < outputs.size()) {
            n << '"' << outputs[i] << '"';
        } else {
            n << "\"l" << layer << "_" << i << '"';
        }
        return n.str();
    };
    os << "digraph sparse_network {\n  rankdir=LR;\n";
    for (std::size_t k = 0; k < mask.keep.size(); ++k)
        for (Eigen::Index d = 0; d < mask.keep[k].rows(); ++d)
            for (Eigen::Index j = 0; j < mask.keep[k].cols(); ++j)
                if (mask.keep[k](d, j)) os << "  " << node(k, j) << " -> " << node(k + 1, d) << ";\n";
    os << "}\n";
    return os.str();
}

}  // namespace vbnn
