#include "medgenius/simulation.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace medgenius::simulation {

namespace cs = core_stats;
namespace mf = mediation_formula;

std::string to_string(Dag dag) {
    switch (dag) {
        case Dag::a: return "a";
        case Dag::b: return "b";
        case Dag::c: return "c";
        case Dag::d: return "d";
    }
    return "?";
}

std::string to_string(Method method) {
    switch (method) {
        case Method::naive: return "naive";
        case Method::genius: return "genius";
        case Method::genius_interaction: return "genius-interaction";
        case Method::oracle: return "oracle";
    }
    return "?";
}

Dag dag_from_string(const std::string& s) {
    if (s == "a") return Dag::a;
    if (s == "b") return Dag::b;
    if (s == "c") return Dag::c;
    if (s == "d") return Dag::d;
    throw InvalidParameter("unknown dag '" + s + "' (expected a, b, c or d)");
}

Method method_from_string(const std::string& s) {
    if (s == "naive") return Method::naive;
    if (s == "genius") return Method::genius;
    if (s == "genius-interaction" || s == "genius_interaction") return Method::genius_interaction;
    if (s == "oracle") return Method::oracle;
    throw InvalidParameter("unknown method '" + s + "'");
}

namespace {

double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool dag_has_w(Dag dag) { return dag != Dag::b; }
bool dag_has_u(Dag dag) { return dag != Dag::a; }

} // namespace

Dataset generate_dataset(const DgpConfig& cfg) {
    if (cfg.n < 10) throw InvalidParameter("generated sample size must be at least 10");

    cs::RandomStream stream(cfg.seed, cfg.stream_id);
    const Eigen::Index n = cfg.n;
    Dataset d;
    d.y.resize(n);
    d.m.resize(n);
    d.a.resize(n);
    d.c.resize(n, 0);
    Eigen::VectorXd u(n), w(n), m_true(n);

    const bool has_w = dag_has_w(cfg.dag);
    const bool has_u = dag_has_u(cfg.dag);

    for (Eigen::Index i = 0; i < n; ++i) {
        // fixed per-row draw order; every component is consumed for every DAG
        // so that runs sharing (seed, stream_id) share their component draws
        const double w_draw = stream.normal(0.0, 1.0);
        const double u_draw = stream.normal(0.0, 1.0);
        const double a_uniform = stream.uniform();
        const double m_shock = stream.normal(0.0, 1.0);
        const double meas_err = stream.normal(0.0, 1.0);
        const double y_shock = stream.normal(0.0, 1.0);

        const double wi = has_w ? w_draw : 0.0;
        const double ui = has_u ? u_draw : 0.0;
        const double ai = a_uniform < expit(wi) ? 1.0 : 0.0;
        const double second = std::abs(0.5 + 0.5 * ai);
        const double sd = cfg.sd_is_second_param ? second : std::sqrt(second);
        const double mi = ai + ui + sd * m_shock;
        w[i] = wi;
        u[i] = ui;
        d.a[i] = ai;
        m_true[i] = mi;
        d.m[i] = (cfg.dag == Dag::d) ? mi + meas_err : mi;
        d.y[i] = ai + mi - ui - wi + y_shock;
    }

    if (has_u) d.latent_u = std::move(u);
    if (has_w) d.latent_w = std::move(w);
    d.true_m = std::move(m_true);
    return d;
}

void validate(const StudyConfig& cfg) {
    if (cfg.dags.empty()) throw InvalidParameter("study needs at least one dag");
    if (cfg.methods.empty()) throw InvalidParameter("study needs at least one method");
    if (cfg.replications < 1) throw InvalidParameter("study needs at least one replication");
    if (cfg.n < 10) throw InvalidParameter("study sample size must be at least 10");
    if (cfg.bootstrap_B != 0 && cfg.bootstrap_B < 100)
        throw InvalidParameter("bootstrap coverage needs B >= 100 (or 0 to disable)");
    for (Method m : cfg.methods)
        if (m == Method::genius_interaction)
            throw InvalidParameter("the study mechanism has no covariates, so the interaction method does not apply");
}

ReportRow operating_characteristics(const std::vector<double>& estimates,
                                    const std::vector<double>& var_estimates,
                                    const std::vector<bool>& ci_hits_delta,
                                    const std::optional<std::vector<bool>>& ci_hits_boot,
                                    double true_value) {
    if (estimates.empty()) throw EmptyInput("no estimates to summarize");
    if (var_estimates.size() != estimates.size() || ci_hits_delta.size() != estimates.size() ||
        (ci_hits_boot && ci_hits_boot->size() != estimates.size()))
        throw DimensionMismatch("operating-characteristics inputs have mismatched lengths");

    const auto r = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= r;

    // population-form variance keeps mse = bias^2 + variance an exact identity
    double variance = 0.0, mse = 0.0;
    for (double e : estimates) {
        variance += (e - mean) * (e - mean);
        mse += (e - true_value) * (e - true_value);
    }
    variance /= r;
    mse /= r;

    ReportRow row;
    row.bias = mean - true_value;
    row.mc_variance = variance;
    row.mse = mse;
    row.proportion_bias_pct = true_value != 0.0
                                  ? 100.0 * row.bias / true_value
                                  : std::numeric_limits<double>::quiet_NaN();
    double var_sum = 0.0;
    for (double v : var_estimates) var_sum += v;
    row.mean_var_estimate = var_sum / r;
    std::size_t hits = 0;
    for (bool h : ci_hits_delta) hits += h ? 1 : 0;
    row.coverage_delta = static_cast<double>(hits) / r;
    if (ci_hits_boot) {
        std::size_t bhits = 0;
        for (bool h : *ci_hits_boot) bhits += h ? 1 : 0;
        row.coverage_bootstrap = static_cast<double>(bhits) / r;
    }
    row.n_used = estimates.size();
    if (estimates.size() < 2)
        row.warnings.push_back("single replicate: Monte Carlo variance and coverage are degenerate");
    if (true_value == 0.0)
        row.warnings.push_back("true value is zero: proportion bias undefined");
    return row;
}

namespace {

struct CellRecord {
    double estimate = 0.0;
    double var_estimate = 0.0;
    bool hit_delta = false;
    bool hit_boot = false;
    bool failed = false;
    std::string failure;
};

genius::NieEstimate estimate_method(Method method, const Dataset& data, const Contrast& contrast,
                                    const genius::Inference& inference) {
    switch (method) {
        case Method::naive:
            return mf::nie_naive(data, contrast.a, contrast.a_star, inference);
        case Method::oracle:
            return mf::nie_oracle(data, contrast.a, contrast.a_star, inference);
        case Method::genius: {
            genius::GeniusOptions opt;
            opt.compute_het_test = false; // diagnostics are useless noise at study scale
            return genius::nie_genius(data, contrast.a, contrast.a_star, inference, opt);
        }
        case Method::genius_interaction: {
            genius::GeniusOptions opt;
            opt.compute_het_test = false;
            return genius::nie_interaction(data, contrast.a, contrast.a_star, inference, opt);
        }
    }
    throw InvalidParameter("unhandled method");
}

} // namespace

SimulationReport run_study(const StudyConfig& cfg, std::vector<ReplicateRecord>* dump) {
    validate(cfg);
    const std::size_t n_dags = cfg.dags.size();
    const std::size_t n_methods = cfg.methods.size();
    const std::size_t reps = cfg.replications;
    const double true_value = cfg.contrast.a - cfg.contrast.a_star; // theta_m = beta_a = 1 in the mechanism
    const bool with_boot = cfg.bootstrap_B > 0;

    std::vector<CellRecord> records(n_dags * n_methods * reps);
    auto slot = [&](std::size_t di, std::size_t mi, std::size_t rep) -> CellRecord& {
        return records[(di * n_methods + mi) * reps + rep];
    };

    auto run_replicate = [&](std::size_t di, std::size_t rep) {
        DgpConfig dgp;
        dgp.dag = cfg.dags[di];
        dgp.n = cfg.n;
        dgp.seed = cfg.seed;
        dgp.stream_id = rep;
        dgp.sd_is_second_param = cfg.sd_is_second_param;

        Dataset data;
        try {
            data = generate_dataset(dgp);
        } catch (const Error& e) {
            for (std::size_t mi = 0; mi < n_methods; ++mi) {
                slot(di, mi, rep).failed = true;
                slot(di, mi, rep).failure = e.what();
            }
            return;
        }

        // bootstrap substream derived from (study seed, dag, replicate) so the
        // resampling plans differ across replicates but not across methods
        genius::Inference inference;
        inference.bootstrap = with_boot;
        inference.B = cfg.bootstrap_B;
        inference.boot_ci = cfg.boot_ci;
        inference.seed =
            cs::RandomStream(cfg.seed, (static_cast<std::uint64_t>(di) << 32) | (rep + 1)).next_u64();

        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            CellRecord& cell = slot(di, mi, rep);
            try {
                const genius::NieEstimate est =
                    estimate_method(cfg.methods[mi], data, cfg.contrast, inference);
                cell.estimate = est.nie;
                cell.var_estimate = est.se_delta * est.se_delta;
                cell.hit_delta =
                    est.ci_delta.first <= true_value && true_value <= est.ci_delta.second;
                if (with_boot && est.ci_bootstrap)
                    cell.hit_boot = est.ci_bootstrap->first <= true_value &&
                                    true_value <= est.ci_bootstrap->second;
            } catch (const Error& e) {
                cell.failed = true;
                cell.failure = e.what();
            }
        }
    };

    const std::size_t n_tasks = n_dags * reps;
    unsigned threads = cfg.threads != 0 ? cfg.threads : std::thread::hardware_concurrency();
    if (threads < 1) threads = 1;
    if (threads <= 1 || n_tasks <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_replicate(t / reps, t % reps);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1))
                run_replicate(t / reps, t % reps);
        };
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SimulationReport report;
    report.config = cfg;
    for (std::size_t di = 0; di < n_dags; ++di) {
        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            std::vector<double> estimates, var_estimates;
            std::vector<bool> hits_delta, hits_boot;
            std::size_t failed = 0;
            for (std::size_t rep = 0; rep < reps; ++rep) {
                const CellRecord& cell = slot(di, mi, rep);
                if (dump) {
                    ReplicateRecord rec;
                    rec.dag = cfg.dags[di];
                    rec.method = cfg.methods[mi];
                    rec.replicate = rep;
                    rec.estimate = cell.estimate;
                    rec.var_estimate = cell.var_estimate;
                    rec.hit_delta = cell.hit_delta;
                    if (with_boot && !cell.failed) rec.hit_boot = cell.hit_boot;
                    rec.failed = cell.failed;
                    rec.failure = cell.failure;
                    dump->push_back(std::move(rec));
                }
                if (cell.failed) {
                    ++failed;
                    continue;
                }
                estimates.push_back(cell.estimate);
                var_estimates.push_back(cell.var_estimate);
                hits_delta.push_back(cell.hit_delta);
                if (with_boot) hits_boot.push_back(cell.hit_boot);
            }
            if (failed * 20 > reps)
                throw TooManyFailures("dag " + to_string(cfg.dags[di]) + ", method " +
                                      to_string(cfg.methods[mi]) + ": " + std::to_string(failed) +
                                      " of " + std::to_string(reps) + " replicates failed");
            if (estimates.empty())
                throw TooManyFailures("dag " + to_string(cfg.dags[di]) + ", method " +
                                      to_string(cfg.methods[mi]) + ": no successful replicates");
            ReportRow row = operating_characteristics(
                estimates, var_estimates, hits_delta,
                with_boot ? std::optional<std::vector<bool>>(hits_boot) : std::nullopt, true_value);
            row.dag = cfg.dags[di];
            row.method = cfg.methods[mi];
            row.n_failed_replicates = failed;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

} // namespace medgenius::simulation
