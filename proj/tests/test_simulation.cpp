#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "medgenius/simulation.hpp"

using namespace medgenius;
namespace sim = medgenius::simulation;
namespace gn = medgenius::genius;

TEST_CASE("dag and method names round-trip") {
    for (auto d : {sim::Dag::a, sim::Dag::b, sim::Dag::c, sim::Dag::d})
        CHECK(sim::dag_from_string(sim::to_string(d)) == d);
    for (auto m : {gn::Method::naive, gn::Method::genius, gn::Method::genius_interaction,
                   gn::Method::oracle})
        CHECK(sim::method_from_string(sim::to_string(m)) == m);
    CHECK(sim::to_string(gn::Method::genius_interaction) == "genius-interaction");
    CHECK_THROWS_AS(sim::dag_from_string("e"), InvalidParameter);
    CHECK_THROWS_AS(sim::method_from_string("bogus"), InvalidParameter);
}

TEST_CASE("generated data carry exactly the latents their dag admits") {
    sim::DgpConfig cfg;
    cfg.n = 50;

    cfg.dag = sim::Dag::a; // exposure-outcome confounding only
    auto da = sim::generate_dataset(cfg);
    CHECK(da.latent_w.has_value());
    CHECK_FALSE(da.latent_u.has_value());
    CHECK(da.true_m.has_value());

    cfg.dag = sim::Dag::b; // mediator-outcome confounding only
    auto db = sim::generate_dataset(cfg);
    CHECK(db.latent_u.has_value());
    CHECK_FALSE(db.latent_w.has_value());

    cfg.dag = sim::Dag::c; // both confounders
    auto dc = sim::generate_dataset(cfg);
    CHECK(dc.latent_u.has_value());
    CHECK(dc.latent_w.has_value());

    cfg.dag = sim::Dag::d; // both plus measurement error
    auto dd = sim::generate_dataset(cfg);
    CHECK(dd.latent_u.has_value());
    CHECK(dd.latent_w.has_value());
    CHECK(dd.true_m.has_value());

    // every dataset is estimator-ready
    for (const auto* d : {&da, &db, &dc, &dd}) {
        CHECK(d->n() == 50);
        CHECK(d->k() == 0);
        CHECK_NOTHROW(gn::validate(*d));
    }
}

TEST_CASE("same (seed, stream) replays the dataset bit for bit") {
    sim::DgpConfig cfg;
    cfg.dag = sim::Dag::c;
    cfg.n = 40;
    cfg.seed = 123;
    cfg.stream_id = 9;
    const auto d1 = sim::generate_dataset(cfg);
    const auto d2 = sim::generate_dataset(cfg);
    CHECK((d1.y.array() == d2.y.array()).all());
    CHECK((d1.m.array() == d2.m.array()).all());
    CHECK((d1.a.array() == d2.a.array()).all());

    cfg.stream_id = 10;
    const auto d3 = sim::generate_dataset(cfg);
    CHECK_FALSE((d1.y.array() == d3.y.array()).all());
}

TEST_CASE("dags sharing a stream share their component draws") {
    sim::DgpConfig cfg;
    cfg.n = 60;
    cfg.seed = 77;
    cfg.stream_id = 4;

    cfg.dag = sim::Dag::c;
    const auto dc = sim::generate_dataset(cfg);
    cfg.dag = sim::Dag::d;
    const auto dd = sim::generate_dataset(cfg);

    // (c) and (d) differ only in the measurement-error overlay on M
    CHECK((dc.a.array() == dd.a.array()).all());
    CHECK((dc.y.array() == dd.y.array()).all());
    CHECK((dc.true_m->array() == dd.true_m->array()).all());
    CHECK((dc.m.array() == dc.true_m->array()).all()); // no measurement error under (c)
    CHECK_FALSE((dd.m.array() == dd.true_m->array()).all()); // overlay active under (d)

    // the error really is an additive shift on the true mediator
    const Eigen::VectorXd err = dd.m - *dd.true_m;
    CHECK(err.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("mediator spread differs by arm the way the design says") {
    sim::DgpConfig cfg;
    cfg.dag = sim::Dag::b;
    cfg.n = 20000;
    cfg.seed = 5;
    const auto d = sim::generate_dataset(cfg);

    // var(M | A=0) = 1 (U) + 0.25 (sd 0.5), var(M | A=1) = 1 + 1
    double s0 = 0, s1 = 0, m0 = 0, m1 = 0;
    int n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
        (d.a[i] == 0.0 ? (m0 += d.m[i], ++n0) : (m1 += d.m[i], ++n1));
    m0 /= n0;
    m1 /= n1;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
        const double c = d.m[i] - (d.a[i] == 0.0 ? m0 : m1);
        (d.a[i] == 0.0 ? s0 : s1) += c * c;
    }
    CHECK(s0 / n0 == doctest::Approx(1.25).epsilon(0.06));
    CHECK(s1 / n1 == doctest::Approx(2.0).epsilon(0.06));
}

TEST_CASE("variance parameterization shrinks the exposed-arm noise") {
    sim::DgpConfig cfg;
    cfg.dag = sim::Dag::b;
    cfg.n = 20000;
    cfg.seed = 5;
    cfg.sd_is_second_param = false; // |0.5 + 0.5a| is now a variance
    const auto d = sim::generate_dataset(cfg);
    double s0 = 0, m0 = 0;
    int n0 = 0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
        if (d.a[i] == 0.0) (m0 += d.m[i], ++n0);
    m0 /= n0;
    for (Eigen::Index i = 0; i < d.n(); ++i)
        if (d.a[i] == 0.0) s0 += (d.m[i] - m0) * (d.m[i] - m0);
    // the unexposed arm is where the two readings disagree:
    // var(M|A=0) = 1 (U) + 0.5 as a variance, but 1 + 0.25 as an sd
    CHECK(s0 / n0 == doctest::Approx(1.5).epsilon(0.06));
}

TEST_CASE("tiny samples are rejected") {
    sim::DgpConfig cfg;
    cfg.n = 9;
    CHECK_THROWS_AS(sim::generate_dataset(cfg), InvalidParameter);
}

TEST_CASE("operating characteristics decompose mse exactly") {
    const std::vector<double> est{1.1, 0.9, 1.3, 0.8, 1.05};
    const std::vector<double> vars{0.02, 0.03, 0.01, 0.04, 0.02};
    const std::vector<bool> hits{true, true, false, true, true};
    const auto row = sim::operating_characteristics(est, vars, hits, std::nullopt, 1.0);

    const double mean = (1.1 + 0.9 + 1.3 + 0.8 + 1.05) / 5.0;
    CHECK(row.bias == doctest::Approx(mean - 1.0).epsilon(1e-14));
    CHECK(row.mse == doctest::Approx(row.bias * row.bias + row.mc_variance).epsilon(1e-14));
    CHECK(row.proportion_bias_pct == doctest::Approx(100.0 * row.bias).epsilon(1e-12));
    CHECK(row.coverage_delta == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(row.mean_var_estimate == doctest::Approx(0.024).epsilon(1e-14));
    CHECK_FALSE(row.coverage_bootstrap.has_value());
    CHECK(row.n_used == 5);
}

TEST_CASE("zero true value flags the proportion bias") {
    const auto row = sim::operating_characteristics({0.1, -0.1}, {0.01, 0.01}, {true, true},
                                                    std::nullopt, 0.0);
    CHECK(std::isnan(row.proportion_bias_pct));
    CHECK_FALSE(row.warnings.empty());
}

TEST_CASE("single replicate reports itself with a warning") {
    const auto row = sim::operating_characteristics({1.2}, {0.01}, {true}, std::nullopt, 1.0);
    CHECK(row.bias == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(row.mc_variance == 0.0);
    CHECK(row.n_used == 1);
    CHECK_FALSE(row.warnings.empty());
}

TEST_CASE("study config validation") {
    sim::StudyConfig cfg;
    cfg.replications = 3;
    cfg.n = 50;
    cfg.bootstrap_B = 0;
    CHECK_NOTHROW(sim::validate(cfg));

    sim::StudyConfig small_b = cfg;
    small_b.bootstrap_B = 99;
    CHECK_THROWS_AS(sim::validate(small_b), InvalidParameter);
    small_b.bootstrap_B = 100;
    CHECK_NOTHROW(sim::validate(small_b));

    sim::StudyConfig no_reps = cfg;
    no_reps.replications = 0;
    CHECK_THROWS_AS(sim::validate(no_reps), InvalidParameter);

    sim::StudyConfig inter = cfg;
    inter.methods = {gn::Method::genius_interaction};
    CHECK_THROWS_AS(sim::validate(inter), InvalidParameter);

    sim::StudyConfig no_dags = cfg;
    no_dags.dags.clear();
    CHECK_THROWS_AS(sim::validate(no_dags), InvalidParameter);
}

TEST_CASE("study reports are identical for any thread count") {
    sim::StudyConfig cfg;
    cfg.dags = {sim::Dag::a, sim::Dag::d};
    cfg.methods = {gn::Method::naive, gn::Method::genius};
    cfg.replications = 8;
    cfg.n = 120;
    cfg.bootstrap_B = 0;
    cfg.seed = 314;

    cfg.threads = 1;
    const auto serial = sim::run_study(cfg);
    cfg.threads = 4;
    const auto parallel = sim::run_study(cfg);

    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].bias == parallel.rows[i].bias); // bitwise
        CHECK(serial.rows[i].mc_variance == parallel.rows[i].mc_variance);
        CHECK(serial.rows[i].coverage_delta == parallel.rows[i].coverage_delta);
    }
}

TEST_CASE("per-replicate dump arrives in deterministic grid order") {
    sim::StudyConfig cfg;
    cfg.dags = {sim::Dag::a, sim::Dag::b};
    cfg.methods = {gn::Method::naive, gn::Method::oracle};
    cfg.replications = 3;
    cfg.n = 60;
    cfg.bootstrap_B = 0;
    cfg.seed = 2718;
    cfg.threads = 3;

    std::vector<sim::ReplicateRecord> dump;
    const auto report = sim::run_study(cfg, &dump);
    REQUIRE(dump.size() == 2 * 2 * 3);
    std::size_t i = 0;
    for (auto dag : cfg.dags)
        for (auto method : cfg.methods)
            for (std::size_t rep = 0; rep < 3; ++rep, ++i) {
                CHECK(dump[i].dag == dag);
                CHECK(dump[i].method == method);
                CHECK(dump[i].replicate == rep);
                CHECK_FALSE(dump[i].failed);
            }

    // and the aggregated row is consistent with its own dump slice
    double mean = 0;
    for (std::size_t r = 0; r < 3; ++r) mean += dump[r].estimate;
    mean /= 3.0;
    CHECK(report.rows[0].bias == doctest::Approx(mean - 1.0).epsilon(1e-12));
}

TEST_CASE("bootstrap coverage column appears only when requested") {
    sim::StudyConfig cfg;
    cfg.dags = {sim::Dag::a};
    cfg.methods = {gn::Method::naive};
    cfg.replications = 2;
    cfg.n = 80;
    cfg.seed = 99;

    cfg.bootstrap_B = 0;
    const auto without = sim::run_study(cfg);
    CHECK_FALSE(without.rows[0].coverage_bootstrap.has_value());

    cfg.bootstrap_B = 100;
    const auto with = sim::run_study(cfg);
    CHECK(with.rows[0].coverage_bootstrap.has_value());
}
