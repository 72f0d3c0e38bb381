#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "medgenius/genius.hpp"
#include "medgenius/mediation_formula.hpp"
#include "medgenius/simulation.hpp"
#include "medgenius/version.hpp"

namespace py = pybind11;
using namespace medgenius;

namespace {

genius::Dataset make_dataset(const Eigen::VectorXd& y, const Eigen::VectorXd& m,
                             const Eigen::VectorXd& a, const Eigen::MatrixXd& c) {
    genius::Dataset d;
    d.y = y;
    d.m = m;
    d.a = a;
    d.c = c.size() == 0 ? Eigen::MatrixXd(y.size(), 0) : c;
    genius::validate(d);
    return d;
}

py::dict fit_to_dict(const genius::GeniusFit& fit) {
    py::dict out;
    out["theta_m"] = fit.theta_m;
    if (fit.theta_mc) out["theta_mc"] = *fit.theta_mc;
    out["se_theta"] = fit.se_theta;
    out["numerator"] = fit.numerator;
    out["denominator"] = fit.denominator;
    out["weak_id"] = fit.weak_id;
    if (fit.het_test) {
        py::dict het;
        het["statistic"] = fit.het_test->statistic;
        het["df"] = fit.het_test->df;
        het["p_value"] = fit.het_test->p_value;
        out["het_test"] = het;
    }
    return out;
}

py::dict estimate_to_dict(const genius::NieEstimate& est) {
    py::dict out;
    out["nie"] = est.nie;
    out["theta_m"] = est.theta_m;
    out["beta_a"] = est.beta_a;
    if (est.theta_mc) out["theta_mc"] = *est.theta_mc;
    if (est.beta_ac) out["beta_ac"] = *est.beta_ac;
    out["se_delta"] = est.se_delta;
    out["ci_delta"] = py::make_tuple(est.ci_delta.first, est.ci_delta.second);
    if (est.se_bootstrap) {
        out["se_bootstrap"] = *est.se_bootstrap;
        out["ci_bootstrap"] = py::make_tuple(est.ci_bootstrap->first, est.ci_bootstrap->second);
        out["bootstrap_failures"] = est.bootstrap_failures;
    }
    out["method"] = simulation::to_string(est.method);
    if (est.fit) out["fit"] = fit_to_dict(*est.fit);
    return out;
}

genius::Inference make_inference(std::size_t bootstrap, std::uint64_t seed, const std::string& ci) {
    genius::Inference inf;
    inf.bootstrap = bootstrap > 0;
    inf.B = bootstrap;
    inf.seed = seed;
    inf.boot_ci = ci == "normal" ? genius::BootCi::normal : genius::BootCi::percentile;
    return inf;
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.attr("__version__") = MEDGENIUS_VERSION;

    // bad inputs should read as ValueError on the python side; everything
    // else (weak identification, rank problems, ...) stays a RuntimeError
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InvalidParameter& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const DimensionMismatch& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const EmptyInput& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    mod.def(
        "nie",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& m, const Eigen::VectorXd& a,
           const Eigen::MatrixXd& c, const std::string& method, double a_level, double a_star,
           std::size_t bootstrap, std::uint64_t seed, const std::string& boot_ci,
           bool first_stage_ax_interaction) {
            genius::Dataset d = make_dataset(y, m, a, c);
            const auto inf = make_inference(bootstrap, seed, boot_ci);
            genius::GeniusOptions opt;
            opt.first_stage_ax_interaction = first_stage_ax_interaction;
            switch (simulation::method_from_string(method)) {
                case genius::Method::naive:
                    return estimate_to_dict(mediation_formula::nie_naive(d, a_level, a_star, inf));
                case genius::Method::genius:
                    return estimate_to_dict(genius::nie_genius(d, a_level, a_star, inf, opt));
                case genius::Method::genius_interaction:
                    return estimate_to_dict(genius::nie_interaction(d, a_level, a_star, inf, opt));
                default:
                    throw InvalidParameter("oracle needs latent columns; use nie_oracle");
            }
        },
        py::arg("y"), py::arg("m"), py::arg("a"), py::arg("c") = Eigen::MatrixXd(),
        py::arg("method") = "genius", py::arg("a_level") = 1.0, py::arg("a_star") = 0.0,
        py::arg("bootstrap") = 0, py::arg("seed") = 1, py::arg("boot_ci") = "percentile",
        py::arg("first_stage_ax_interaction") = false,
        "estimate the natural indirect effect; returns a dict of point estimates and errors");

    mod.def(
        "nie_oracle",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& m, const Eigen::VectorXd& a,
           const Eigen::MatrixXd& c, const Eigen::VectorXd& latent_u, const Eigen::VectorXd& latent_w,
           const Eigen::VectorXd& true_m, double a_level, double a_star) {
            genius::Dataset d = make_dataset(y, m, a, c);
            if (latent_u.size()) d.latent_u = latent_u;
            if (latent_w.size()) d.latent_w = latent_w;
            if (true_m.size()) d.true_m = true_m;
            return estimate_to_dict(
                mediation_formula::nie_oracle(d, a_level, a_star, genius::Inference{}));
        },
        py::arg("y"), py::arg("m"), py::arg("a"), py::arg("c") = Eigen::MatrixXd(),
        py::arg("latent_u") = Eigen::VectorXd(), py::arg("latent_w") = Eigen::VectorXd(),
        py::arg("true_m") = Eigen::VectorXd(), py::arg("a_level") = 1.0, py::arg("a_star") = 0.0);

    mod.def(
        "genius_theta_m",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& m, const Eigen::VectorXd& a,
           const Eigen::MatrixXd& c, bool first_stage_ax_interaction) {
            genius::Dataset d = make_dataset(y, m, a, c);
            genius::GeniusOptions opt;
            opt.first_stage_ax_interaction = first_stage_ax_interaction;
            return fit_to_dict(genius::genius_theta_m(d, opt));
        },
        py::arg("y"), py::arg("m"), py::arg("a"), py::arg("c") = Eigen::MatrixXd(),
        py::arg("first_stage_ax_interaction") = false);

    mod.def(
        "het_variance_test",
        [](const Eigen::VectorXd& m, const Eigen::VectorXd& a, const Eigen::MatrixXd& c) {
            genius::Dataset d;
            d.m = m;
            d.a = a;
            d.y = Eigen::VectorXd::Zero(m.size());
            d.c = c.size() == 0 ? Eigen::MatrixXd(m.size(), 0) : c;
            const auto het = genius::het_variance_test(d);
            py::dict out;
            out["statistic"] = het.statistic;
            out["df"] = het.df;
            out["p_value"] = het.p_value;
            out["variance_by_level"] = het.variance_by_level;
            return out;
        },
        py::arg("m"), py::arg("a"), py::arg("c") = Eigen::MatrixXd());

    mod.def(
        "generate_dataset",
        [](const std::string& dag, Eigen::Index n, std::uint64_t seed, std::uint64_t stream_id,
           bool sd_is_second_param) {
            simulation::DgpConfig cfg;
            cfg.dag = simulation::dag_from_string(dag);
            cfg.n = n;
            cfg.seed = seed;
            cfg.stream_id = stream_id;
            cfg.sd_is_second_param = sd_is_second_param;
            const genius::Dataset d = simulation::generate_dataset(cfg);
            py::dict out;
            out["y"] = d.y;
            out["m"] = d.m;
            out["a"] = d.a;
            out["c"] = d.c;
            if (d.latent_u) out["latent_u"] = *d.latent_u;
            if (d.latent_w) out["latent_w"] = *d.latent_w;
            if (d.true_m) out["true_m"] = *d.true_m;
            return out;
        },
        py::arg("dag"), py::arg("n") = 1000, py::arg("seed") = 1, py::arg("stream_id") = 0,
        py::arg("sd_is_second_param") = true);

    mod.def(
        "run_study",
        [](const std::vector<std::string>& dags, const std::vector<std::string>& methods,
           std::size_t replications, Eigen::Index n, std::size_t bootstrap_B, std::uint64_t seed,
           unsigned threads, bool sd_is_second_param) {
            simulation::StudyConfig cfg;
            cfg.dags.clear();
            cfg.methods.clear();
            for (const auto& s : dags) cfg.dags.push_back(simulation::dag_from_string(s));
            for (const auto& s : methods) cfg.methods.push_back(simulation::method_from_string(s));
            cfg.replications = replications;
            cfg.n = n;
            cfg.bootstrap_B = bootstrap_B;
            cfg.seed = seed;
            cfg.threads = threads;
            cfg.sd_is_second_param = sd_is_second_param;
            simulation::validate(cfg);
            const auto report = simulation::run_study(cfg);
            py::list rows;
            for (const auto& row : report.rows) {
                py::dict r;
                r["dag"] = simulation::to_string(row.dag);
                r["method"] = simulation::to_string(row.method);
                r["bias"] = row.bias;
                r["mc_variance"] = row.mc_variance;
                r["proportion_bias_pct"] = row.proportion_bias_pct;
                r["mse"] = row.mse;
                r["mean_var_estimate"] = row.mean_var_estimate;
                r["coverage_delta"] = row.coverage_delta;
                if (row.coverage_bootstrap) r["coverage_bootstrap"] = *row.coverage_bootstrap;
                r["n_failed_replicates"] = row.n_failed_replicates;
                r["n_used"] = row.n_used;
                rows.append(r);
            }
            return rows;
        },
        py::arg("dags"), py::arg("methods"), py::arg("replications") = 500, py::arg("n") = 1000,
        py::arg("bootstrap_B") = 0, py::arg("seed") = 1, py::arg("threads") = 0,
        py::arg("sd_is_second_param") = true);

    mod.def(
        "rr_nie",
        [](const std::vector<std::string>& m_levels, const std::vector<std::string>& a_levels,
           const std::vector<std::string>& c_levels, const std::vector<std::uint64_t>& counts,
           const std::string& a, const std::string& a_star, const std::string& c) {
            mediation_formula::DiscreteMediationTable t;
            t.m_levels = m_levels;
            t.a_levels = a_levels;
            t.c_levels = c_levels;
            t.counts = counts;
            mediation_formula::validate(t);
            const auto est = mediation_formula::rr_nie_plugin(t, a, a_star, c);
            py::dict out;
            out["rr"] = est.rr;
            out["numerator"] = est.numerator;
            out["denominator"] = est.denominator;
            return out;
        },
        py::arg("m_levels"), py::arg("a_levels"), py::arg("c_levels"), py::arg("counts"),
        py::arg("a"), py::arg("a_star"), py::arg("c"),
        "risk-ratio NIE plug-in from a dense count table (y fastest, then m, a, c)");
}
