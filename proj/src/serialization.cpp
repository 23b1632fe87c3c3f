#include "vbnn/serialization.hpp"

#include <fstream>
#include <stdexcept>

namespace vbnn {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Row-major list of rows.
json mat(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
    return rows;
}

Eigen::MatrixXd mat_from(const json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Eigen::VectorXd r = vec_from(j[i]);
        if (r.size() != cols) throw std::runtime_error("matrix row has the wrong length");
        m.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    return m;
}

json packed_lower(const Eigen::MatrixXd& B) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j <= i; ++j) v.push_back(B(i, j));
    return v;
}

Eigen::MatrixXd unpack_lower(const json& j, Eigen::Index n) {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != n * (n + 1) / 2) throw std::runtime_error("packed matrix has wrong size");
    Eigen::MatrixXd B(n, n);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c <= i; ++c) {
            B(i, c) = v[k];
            B(c, i) = v[k];
            ++k;
        }
    return B;
}

json gig(const GigParams& p) { return {{"nu", p.nu}, {"delta", p.delta}, {"lambda", p.lam}}; }
GigParams gig_from(const json& j) { return {j.at("nu").get<double>(), j.at("delta").get<double>(), j.at("lambda").get<double>()}; }
json ig(const InvGammaParams& p) { return {{"alpha", p.alpha}, {"beta", p.beta}}; }
InvGammaParams ig_from(const json& j) { return {j.at("alpha").get<double>(), j.at("beta").get<double>()}; }

void check_schema(const json& j) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::runtime_error("unsupported schema_version");
}

}  // namespace

json to_json(const NetworkConfig& c) {
    return {{"dims", c.dims},
            {"temperature", c.temperature},
            {"prior_family", to_string(c.prior_family)},
            {"glob_prior", gig(c.glob_prior)},
            {"loc_prior_base", gig(c.loc_prior_base)},
            {"bias_var", c.bias_var},
            {"noise_prior_out", ig(c.noise_prior_out)},
            {"noise_prior_hidden", ig(c.noise_prior_hidden)},
            {"em_enabled", c.em_enabled},
            {"seed", c.seed}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig c;
    c.dims = j.at("dims").get<std::vector<int>>();
    c.temperature = j.at("temperature").get<double>();
    c.prior_family = prior_family_from_string(j.at("prior_family").get<std::string>());
    c.glob_prior = gig_from(j.at("glob_prior"));
    c.loc_prior_base = gig_from(j.at("loc_prior_base"));
    c.bias_var = j.at("bias_var").get<double>();
    c.noise_prior_out = ig_from(j.at("noise_prior_out"));
    c.noise_prior_hidden = ig_from(j.at("noise_prior_hidden"));
    c.em_enabled = j.at("em_enabled").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json to_json(const GlobalVariational& g) {
    json h = {{"family", to_string(g.hyper.family)},
              {"temperature", g.hyper.temperature},
              {"bias_var", g.hyper.bias_var},
              {"noise_out", ig(g.hyper.noise_out)},
              {"noise_hidden", ig(g.hyper.noise_hidden)},
              {"em_enabled", g.hyper.em_enabled},
              {"glob", gig(g.hyper.glob)},
              {"loc", json::array()}};
    for (const auto& p : g.hyper.loc) h["loc"].push_back(gig(p));
    json layers = json::array();
    for (const auto& wl : g.layers) {
        json rows = json::array();
        for (int d = 0; d < wl.rows(); ++d)
            rows.push_back({{"m", vec(wl.mean[d])}, {"B", packed_lower(wl.cov[d])}, {"alpha", wl.noise[d].alpha},
                            {"beta", wl.noise[d].beta}});
        layers.push_back({{"inputs", wl.inputs()},
                          {"rows", rows},
                          {"tau", gig(wl.tau)},
                          {"psi_nu", wl.psi_nu},
                          {"psi_lambda", wl.psi_lam},
                          {"psi_delta", mat(wl.psi_delta)}});
    }
    return {{"hyper", h}, {"layers", layers}};
}

GlobalVariational global_from_json(const json& j) {
    GlobalVariational g;
    const json& h = j.at("hyper");
    g.hyper.family = prior_family_from_string(h.at("family").get<std::string>());
    g.hyper.temperature = h.at("temperature").get<double>();
    g.hyper.bias_var = h.at("bias_var").get<double>();
    g.hyper.noise_out = ig_from(h.at("noise_out"));
    g.hyper.noise_hidden = ig_from(h.at("noise_hidden"));
    g.hyper.em_enabled = h.at("em_enabled").get<bool>();
    g.hyper.glob = gig_from(h.at("glob"));
    for (const auto& p : h.at("loc")) g.hyper.loc.push_back(gig_from(p));
    for (const auto& jl : j.at("layers")) {
        WeightLayer wl;
        const int inputs = jl.at("inputs").get<int>();
        for (const auto& r : jl.at("rows")) {
            wl.mean.push_back(vec_from(r.at("m")));
            if (wl.mean.back().size() != inputs + 1) throw std::runtime_error("weight row has the wrong length");
            wl.cov.push_back(unpack_lower(r.at("B"), inputs + 1));
            wl.noise.push_back({r.at("alpha").get<double>(), r.at("beta").get<double>()});
        }
        wl.tau = gig_from(jl.at("tau"));
        wl.psi_nu = jl.at("psi_nu").get<double>();
        wl.psi_lam = jl.at("psi_lambda").get<double>();
        wl.psi_delta = mat_from(jl.at("psi_delta"), inputs);
        g.layers.push_back(std::move(wl));
    }
    return g;
}

json to_json(const FitResult& r) {
    return {{"schema_version", kSchemaVersion},
            {"config", to_json(r.config)},
            {"global", to_json(r.global)},
            {"elbo_trace", r.elbo_trace},
            {"converged", r.converged},
            {"seed", r.seed},
            {"wall_time", r.wall_time},
            {"normalization", {{"mean", vec(r.norm.mean)}, {"sd", vec(r.norm.sd)}}},
            {"feature_names", r.feature_names},
            {"target_names", r.target_names}};
}

FitResult fit_result_from_json(const json& j) {
    check_schema(j);
    FitResult r;
    r.config = config_from_json(j.at("config"));
    r.global = global_from_json(j.at("global"));
    r.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
    r.converged = j.at("converged").get<bool>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_time = j.at("wall_time").get<double>();
    r.norm.mean = vec_from(j.at("normalization").at("mean"));
    r.norm.sd = vec_from(j.at("normalization").at("sd"));
    r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    r.target_names = j.at("target_names").get<std::vector<std::string>>();
    return r;
}

json to_json(const SparseMask& m) {
    json layers = json::array();
    for (const auto& k : m.keep) {
        json rows = json::array();
        for (Eigen::Index d = 0; d < k.rows(); ++d) {
            std::vector<int> r;
            for (Eigen::Index c = 0; c < k.cols(); ++c) r.push_back(k(d, c) ? 1 : 0);
            rows.push_back(r);
        }
        layers.push_back({{"rows", k.rows()}, {"cols", k.cols()}, {"keep", rows}});
    }
    return {{"schema_version", kSchemaVersion},
            {"alpha", m.alpha},
            {"kappa", m.kappa},
            {"kept_edges", m.kept_edges()},
            {"total_edges", m.total_edges()},
            {"node_alive", m.node_alive},
            {"layers", layers}};
}

SparseMask mask_from_json(const json& j) {
    check_schema(j);
    SparseMask m;
    m.alpha = j.at("alpha").get<double>();
    m.kappa = j.at("kappa").get<double>();
    for (const auto& l : j.at("layers")) {
        BoolMatrix k(l.at("rows").get<Eigen::Index>(), l.at("cols").get<Eigen::Index>());
        const auto& rows = l.at("keep");
        for (Eigen::Index d = 0; d < k.rows(); ++d)
            for (Eigen::Index c = 0; c < k.cols(); ++c) k(d, c) = rows.at(d).at(c).get<int>() != 0;
        m.keep.push_back(std::move(k));
    }
    structural_prune(m);
    return m;
}

json to_json(const EnsembleModel& e) {
    json members = json::array();
    for (const auto& m : e.members) members.push_back(to_json(m));
    return {{"schema_version", kSchemaVersion}, {"zeta", e.zeta}, {"weights", vec(e.weights)}, {"members", members}};
}

EnsembleModel ensemble_from_json(const json& j) {
    check_schema(j);
    EnsembleModel e;
    e.zeta = j.at("zeta").get<double>();
    e.weights = vec_from(j.at("weights"));
    for (const auto& m : j.at("members")) e.members.push_back(fit_result_from_json(m));
    if (static_cast<Eigen::Index>(e.members.size()) != e.weights.size())
        throw std::runtime_error("ensemble weights do not match members");
    return e;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
    }
}

}  // namespace vbnn
