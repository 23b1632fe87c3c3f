#include "vbnn/cli.hpp"

#include "vbnn/cavi.hpp"
#include "vbnn/data_io.hpp"
#include "vbnn/ensemble.hpp"
#include "vbnn/predictor.hpp"
#include "vbnn/serialization.hpp"
#include "vbnn/sparsifier.hpp"
#include "vbnn/svi.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <random>

namespace vbnn {

namespace {

using nlohmann::json;

struct ModelFlags {
    std::string data;
    std::vector<std::string> targets{"y"};
    int hidden = 20;
    int depth = 1;
    std::string prior = "ig";
    double temperature = 0.1;
    std::uint64_t seed = 0;
    std::optional<double> nu_glob, delta_glob, lambda_glob, nu_loc, delta_loc, lambda_loc;
    double bias_var = 1.0;
    double noise_alpha = 2.0, noise_beta = 0.5;
    double hidden_noise_alpha = 3.0, hidden_noise_beta = 0.03;
    bool no_em = false;
    std::string init = "laplace";
    double train_tol = 1e-5;
    int max_sweeps = 5000;
    bool svi = false;
    int batch_size = 32;
    double forgetting_rate = 0.7;
    int svi_iters = 2000;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--data", f.data, "training CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--target", f.targets, "target column name(s)");
    cmd->add_option("--hidden", f.hidden, "hidden layer width")->check(CLI::PositiveNumber);
    cmd->add_option("--depth", f.depth, "number of hidden layers")->check(CLI::PositiveNumber);
    cmd->add_option("--prior", f.prior, "shrinkage family")->check(CLI::IsMember({"ig", "gamma", "igauss", "gig"}));
    cmd->add_option("--temperature", f.temperature, "relaxed ReLU temperature")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--nu-glob", f.nu_glob);
    cmd->add_option("--delta-glob", f.delta_glob);
    cmd->add_option("--lambda-glob", f.lambda_glob);
    cmd->add_option("--nu-loc", f.nu_loc);
    cmd->add_option("--delta-loc", f.delta_loc);
    cmd->add_option("--lambda-loc", f.lambda_loc);
    cmd->add_option("--bias-var", f.bias_var, "prior variance of biases")->check(CLI::PositiveNumber);
    cmd->add_option("--noise-alpha", f.noise_alpha, "output noise prior shape");
    cmd->add_option("--noise-beta", f.noise_beta, "output noise prior scale");
    cmd->add_option("--hidden-noise-alpha", f.hidden_noise_alpha);
    cmd->add_option("--hidden-noise-beta", f.hidden_noise_beta);
    cmd->add_flag("--no-em", f.no_em, "keep the global hyperparameter fixed");
    cmd->add_option("--init", f.init)->check(CLI::IsMember({"laplace", "spike_slab"}));
    cmd->add_option("--train-tol", f.train_tol, "relative ELBO tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--max-sweeps", f.max_sweeps, "sweep limit")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--svi", f.svi, "stochastic variational inference");
    cmd->add_option("--batch-size", f.batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--forgetting-rate", f.forgetting_rate)->check(CLI::Range(0.5, 1.0));
    cmd->add_option("--svi-iters", f.svi_iters)->check(CLI::PositiveNumber);
}

NetworkConfig make_config(const ModelFlags& f, const Dataset& data) {
    NetworkConfig c;
    c.dims.push_back(static_cast<int>(data.X.cols()));
    for (int l = 0; l < f.depth; ++l) c.dims.push_back(f.hidden);
    c.dims.push_back(static_cast<int>(data.Y.cols()));
    c.temperature = f.temperature;
    c.prior_family = prior_family_from_string(f.prior);
    c.glob_prior = default_prior(c.prior_family);
    c.loc_prior_base = default_prior(c.prior_family);
    if (f.nu_glob) c.glob_prior.nu = *f.nu_glob;
    if (f.delta_glob) c.glob_prior.delta = *f.delta_glob;
    if (f.lambda_glob) c.glob_prior.lam = *f.lambda_glob;
    if (f.nu_loc) c.loc_prior_base.nu = *f.nu_loc;
    if (f.delta_loc) c.loc_prior_base.delta = *f.delta_loc;
    if (f.lambda_loc) c.loc_prior_base.lam = *f.lambda_loc;
    c.bias_var = f.bias_var;
    c.noise_prior_out = {f.noise_alpha, f.noise_beta};
    c.noise_prior_hidden = {f.hidden_noise_alpha, f.hidden_noise_beta};
    c.em_enabled = !f.no_em;
    c.seed = f.seed;
    c.validate();
    return c;
}

CaviOptions cavi_options(const ModelFlags& f) {
    CaviOptions o;
    o.elbo_tol = f.train_tol;
    o.max_sweeps = f.max_sweeps;
    o.init = init_scheme_from_string(f.init);
    return o;
}

void write_manifest(const std::string& out, const std::string& command, const json& details, double wall) {
    json m = {{"schema_version", kSchemaVersion},
              {"command", command},
              {"output", out},
              {"library", "vbnn"},
              {"library_version", "1.0.0"},
              {"wall_time", wall},
              {"details", details}};
    atomic_write(out + ".manifest.json", m.dump(2));
}

// Selects the model's feature columns from a CSV by name.
Eigen::MatrixXd load_inputs(const std::string& path, const std::vector<std::string>& features,
                            const std::vector<std::string>& targets, Eigen::MatrixXd* Y, char delimiter) {
    const Table t = read_csv(path, delimiter);
    auto col = [&](const std::string& name) -> int {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        return it == t.header.end() ? -1 : static_cast<int>(it - t.header.begin());
    };
    std::vector<int> fc;
    for (const auto& f : features) {
        const int c = col(f);
        if (c < 0) throw std::invalid_argument("column '" + f + "' missing from " + path);
        fc.push_back(c);
    }
    if (Y) {
        std::vector<int> tc;
        for (const auto& name : targets) {
            const int c = col(name);
            if (c < 0) throw std::invalid_argument("target column '" + name + "' missing from " + path);
            tc.push_back(c);
        }
        *Y = t.values(Eigen::all, tc);
    }
    return t.values(Eigen::all, fc);
}

struct Predictor {
    std::optional<FitResult> model;
    std::optional<EnsembleModel> ensemble;
    std::optional<SparseMask> mask;

    const FitResult& reference() const { return model ? *model : ensemble->members.front(); }

    std::vector<PredictiveSummary> run(const Eigen::MatrixXd& X_raw, const PredictOptions& opt) const {
        const Eigen::MatrixXd X = normalize(X_raw, reference().norm);
        if (ensemble) return ensemble_predict(*ensemble, X, opt);
        if (mask) return sparse_predict(model->global, *mask, X, opt);
        return predict(model->global, X, opt);
    }

    // J draws per input row; ensemble draws pick a member by weight first.
    Eigen::MatrixXd samples(const Eigen::MatrixXd& X_raw, const PredictOptions& opt, int J, Rng& rng) const {
        if (mask)
            for (const auto& layer : alive_nodes(*mask))
                if (layer.empty()) throw std::invalid_argument("cannot sample from a network with an empty hidden layer");
        const Eigen::MatrixXd X = normalize(X_raw, reference().norm);
        std::vector<GlobalVariational> nets;
        Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
        if (ensemble) {
            for (const auto& m : ensemble->members) nets.push_back(m.global);
            w = ensemble->weights;
        } else {
            nets.push_back(mask ? apply_mask(model->global, *mask, true) : model->global);
        }
        const Eigen::Index D = reference().global.layers.back().rows();
        Eigen::MatrixXd out(X.rows() * J, D);
        std::discrete_distribution<int> pick(w.data(), w.data() + w.size());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::vector<LocalPoint> fits;
            for (const auto& g : nets) fits.push_back(predictive_local_fit(g, X.row(i).transpose(), opt));
            for (int j = 0; j < J; ++j) {
                const int k = pick(rng);
                out.row(i * J + j) = sample_predictive(nets[k], fits[k], 1, rng).row(0);
            }
        }
        return out;
    }
};

Predictor load_predictor(const std::string& model_path, const std::string& ensemble_path, const std::string& mask_path) {
    Predictor p;
    if (model_path.empty() == ensemble_path.empty())
        throw std::invalid_argument("give exactly one of --model or --ensemble");
    if (!model_path.empty()) p.model = fit_result_from_json(read_json_file(model_path));
    if (!ensemble_path.empty()) p.ensemble = ensemble_from_json(read_json_file(ensemble_path));
    if (!mask_path.empty()) {
        if (!p.model) throw std::invalid_argument("--sparse needs --model");
        p.mask = mask_from_json(read_json_file(mask_path));
    }
    return p;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Variational Bayesian bow-tie networks with shrinkage priors"};
    app.require_subcommand(1);
    std::string delimiter = ",";
    app.add_option("--delimiter", delimiter, "field separator of input files (single character)")
        ->check([](const std::string& v) { return v.size() == 1 ? std::string() : std::string("must be one character"); });

    ModelFlags train_flags;
    std::string train_out;
    auto* train = app.add_subcommand("train", "fit a network and write the model JSON");
    add_model_flags(train, train_flags);
    train->add_option("--out", train_out, "model JSON path")->required();

    ModelFlags ens_flags;
    std::string ens_out;
    int ens_k = 4;
    double zeta = 0.05;
    auto* ens = app.add_subcommand("ensemble", "fit an ELBO-weighted ensemble");
    add_model_flags(ens, ens_flags);
    ens->add_option("--k", ens_k, "number of members")->check(CLI::PositiveNumber);
    ens->add_option("--zeta", zeta, "ELBO weight sharpness")->check(CLI::NonNegativeNumber);
    ens->add_option("--out", ens_out, "ensemble JSON path")->required();

    std::string pred_model, pred_ens, pred_data, pred_out, pred_sparse;
    double ci_level = 0.95, predict_tol = 1e-4;
    int pred_samples = 0;
    std::uint64_t pred_seed = 0;
    auto* pred = app.add_subcommand("predict", "write predictive mean, sd and credible interval per row");
    pred->add_option("--model", pred_model)->check(CLI::ExistingFile);
    pred->add_option("--ensemble", pred_ens)->check(CLI::ExistingFile);
    pred->add_option("--sparse", pred_sparse, "mask JSON from select")->check(CLI::ExistingFile);
    pred->add_option("--data", pred_data, "input CSV")->required()->check(CLI::ExistingFile);
    pred->add_option("--ci-level", ci_level)->check(CLI::Range(0.0, 1.0));
    pred->add_option("--predict-tol", predict_tol)->check(CLI::PositiveNumber);
    pred->add_option("--out", pred_out, "predictions CSV")->required();
    pred->add_option("--samples", pred_samples, "draws per row written to <out>.samples.csv")
        ->check(CLI::NonNegativeNumber);
    pred->add_option("--seed", pred_seed, "seed for --samples");

    std::string sel_model, sel_out, sel_dot;
    double alpha = 0.05;
    auto* sel = app.add_subcommand("select", "FDR-controlled weight and node selection");
    sel->add_option("--model", sel_model)->required()->check(CLI::ExistingFile);
    sel->add_option("--alpha", alpha, "target false discovery rate")->check(CLI::Range(0.0, 1.0));
    sel->add_option("--out", sel_out, "mask JSON")->required();
    sel->add_option("--dot", sel_dot, "Graphviz DOT of the kept edges");

    std::string ev_model, ev_ens, ev_data, ev_out, ev_sparse;
    double ev_level = 0.95, ev_tol = 1e-4;
    auto* ev = app.add_subcommand("eval", "RMSE, NLL and coverage on a labelled CSV");
    ev->add_option("--model", ev_model)->check(CLI::ExistingFile);
    ev->add_option("--ensemble", ev_ens)->check(CLI::ExistingFile);
    ev->add_option("--sparse", ev_sparse)->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data)->required()->check(CLI::ExistingFile);
    ev->add_option("--ci-level", ev_level)->check(CLI::Range(0.0, 1.0));
    ev->add_option("--predict-tol", ev_tol)->check(CLI::PositiveNumber);
    ev->add_option("--out", ev_out, "metrics JSON")->required();

    int sim_n = 300;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "write the two-input toy regression data");
    sim->add_option("--n", sim_n)->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--out", sim_out)->required();

    std::string sp_data, sp_train, sp_test;
    std::vector<std::string> sp_targets{"y"};
    double sp_frac = 0.9;
    std::uint64_t sp_seed = 0;
    auto* sp = app.add_subcommand("split", "seeded train/test split of a CSV");
    sp->add_option("--data", sp_data)->required()->check(CLI::ExistingFile);
    sp->add_option("--target", sp_targets);
    sp->add_option("--train-frac", sp_frac)->check(CLI::Range(0.0, 1.0));
    sp->add_option("--seed", sp_seed);
    sp->add_option("--out-train", sp_train)->required();
    sp->add_option("--out-test", sp_test)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    try {
        if (*train) {
            const Dataset data = load_dataset(train_flags.data, train_flags.targets, delimiter[0]);
            const NetworkConfig config = make_config(train_flags, data);
            Rng rng(config.seed);
            FitResult res;
            if (train_flags.svi) {
                SviOptions o;
                o.batch_size = std::min(train_flags.batch_size, data.size());
                o.forgetting_rate = train_flags.forgetting_rate;
                o.max_iters = train_flags.svi_iters;
                o.init = init_scheme_from_string(train_flags.init);
                res = fit_svi(config, data, o, rng);
            } else {
                res = fit_cavi(config, data, cavi_options(train_flags), rng);
            }
            atomic_write(train_out, to_json(res).dump());
            Table trace;
            trace.header = {"iteration", "elbo"};
            trace.values.resize(static_cast<Eigen::Index>(res.elbo_trace.size()), 2);
            for (std::size_t i = 0; i < res.elbo_trace.size(); ++i) trace.values.row(i) << static_cast<double>(i), res.elbo_trace[i];
            atomic_write(train_out + ".elbo.csv", table_csv(trace));
            write_manifest(train_out, "train",
                           {{"config", to_json(config)},
                            {"data", train_flags.data},
                            {"svi", train_flags.svi},
                            {"converged", res.converged},
                            {"iterations", res.elbo_trace.size()},
                            {"final_elbo", res.final_elbo()}},
                           elapsed());
            std::cout << "trained " << res.elbo_trace.size() - 1 << " iterations, ELBO " << res.final_elbo()
                      << (res.converged ? " (converged)" : " (not converged)") << "\n";
        } else if (*ens) {
            const Dataset data = load_dataset(ens_flags.data, ens_flags.targets, delimiter[0]);
            const NetworkConfig config = make_config(ens_flags, data);
            const EnsembleModel model = fit_ensemble(config, data, ens_k, zeta, cavi_options(ens_flags), config.seed);
            atomic_write(ens_out, to_json(model).dump());
            std::vector<double> w(model.weights.data(), model.weights.data() + model.weights.size());
            write_manifest(ens_out, "ensemble",
                           {{"config", to_json(config)}, {"data", ens_flags.data}, {"members", ens_k}, {"zeta", zeta},
                            {"weights", w}},
                           elapsed());
            std::cout << "fitted " << ens_k << " members\n";
        } else if (*pred) {
            const Predictor p = load_predictor(pred_model, pred_ens, pred_sparse);
            const FitResult& ref = p.reference();
            const Eigen::MatrixXd X = load_inputs(pred_data, ref.feature_names, ref.target_names, nullptr, delimiter[0]);
            PredictOptions opt;
            opt.tol = predict_tol;
            const auto preds = p.run(X, opt);
            atomic_write(pred_out, predictions_csv(preds, ci_level));
            if (pred_samples > 0) {
                Rng rng(pred_seed);
                const Eigen::MatrixXd draws = p.samples(X, opt, pred_samples, rng);
                Table t;
                t.header = {"index", "draw"};
                for (const auto& name : ref.target_names) t.header.push_back(name);
                t.values.resize(draws.rows(), 2 + draws.cols());
                for (Eigen::Index r = 0; r < draws.rows(); ++r) {
                    t.values(r, 0) = static_cast<double>(r / pred_samples);
                    t.values(r, 1) = static_cast<double>(r % pred_samples);
                    t.values.row(r).tail(draws.cols()) = draws.row(r);
                }
                atomic_write(pred_out + ".samples.csv", table_csv(t));
            }
            write_manifest(pred_out, "predict",
                           {{"model", pred_model.empty() ? pred_ens : pred_model},
                            {"sparse", pred_sparse},
                            {"data", pred_data},
                            {"ci_level", ci_level},
                            {"samples", pred_samples},
                            {"seed", pred_seed},
                            {"rows", X.rows()}},
                           elapsed());
        } else if (*sel) {
            const FitResult model = fit_result_from_json(read_json_file(sel_model));
            const SparseMask mask = select_nodes(model.global, alpha);
            if (mask.kept_edges() == 0) std::cerr << "warning: every weight was pruned\n";
            atomic_write(sel_out, to_json(mask).dump(2));
            if (!sel_dot.empty()) atomic_write(sel_dot, mask_to_dot(mask, model.feature_names, model.target_names));
            write_manifest(sel_out, "select",
                           {{"model", sel_model}, {"alpha", alpha}, {"kept_edges", mask.kept_edges()},
                            {"total_edges", mask.total_edges()}},
                           elapsed());
            std::cout << "kept " << mask.kept_edges() << " of " << mask.total_edges() << " edges\n";
        } else if (*ev) {
            const Predictor p = load_predictor(ev_model, ev_ens, ev_sparse);
            const FitResult& ref = p.reference();
            Eigen::MatrixXd Y;
            const Eigen::MatrixXd X = load_inputs(ev_data, ref.feature_names, ref.target_names, &Y, delimiter[0]);
            PredictOptions opt;
            opt.tol = ev_tol;
            const Metrics m = evaluate(p.run(X, opt), Y, ev_level);
            const json out = {{"schema_version", kSchemaVersion}, {"rmse", m.rmse}, {"nll", m.nll},
                              {"coverage", m.coverage},           {"ci_level", m.level}, {"n", m.n}};
            atomic_write(ev_out, out.dump(2));
            write_manifest(ev_out, "eval", {{"data", ev_data}, {"metrics", out}}, elapsed());
            std::cout << out.dump() << "\n";
        } else if (*sim) {
            Rng rng(sim_seed);
            const Dataset d = simulate_toy(sim_n, rng);
            Table t;
            t.header = {"x1", "x2", "y"};
            t.values.resize(d.size(), 3);
            t.values << d.X_raw, d.Y;
            atomic_write(sim_out, table_csv(t));
        } else if (*sp) {
            const Dataset d = load_dataset(sp_data, sp_targets, delimiter[0]);
            const auto [tr, te] = split(d, sp_frac, sp_seed);
            auto dump = [&](const Dataset& part, const std::string& path) {
                Table t;
                t.header = part.feature_names;
                t.header.insert(t.header.end(), part.target_names.begin(), part.target_names.end());
                t.values.resize(part.size(), part.X_raw.cols() + part.Y.cols());
                t.values << part.X_raw, part.Y;
                atomic_write(path, table_csv(t));
            };
            dump(tr, sp_train);
            dump(te, sp_test);
        }
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}

}  // namespace vbnn
