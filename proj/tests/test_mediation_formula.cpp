#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "medgenius/mediation_formula.hpp"

using namespace medgenius;
namespace mf = medgenius::mediation_formula;
namespace gn = medgenius::genius;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

gn::Dataset fix4() {
    gn::Dataset d;
    d.y = vec({0, 1, 2, 4});
    d.m = vec({0, 1, 1, 3});
    d.a = vec({0, 0, 1, 1});
    d.c = Eigen::MatrixXd(4, 0);
    return d;
}

// the counts from the worked 2x2x2 example: rr should be exactly 63/58
mf::DiscreteMediationTable rr_table() {
    mf::DiscreteMediationTable t;
    t.m_levels = {"0", "1"};
    t.a_levels = {"0", "1"};
    t.c_levels = {"0"};
    // dense, y fastest: (y0,m0,a0) (y1,m0,a0) (y0,m1,a0) (y1,m1,a0) then a1
    t.counts = {5, 2, 3, 4, 6, 1, 2, 7};
    return t;
}

} // namespace

TEST_CASE("product-of-coefficients estimator on the exact-fit fixture") {
    // y = m + a holds exactly in fix4, so the outcome stage is noiseless
    const auto est = mf::nie_naive(fix4(), 1.0, 0.0);
    CHECK(est.theta_m == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(est.beta_a == doctest::Approx(1.4999999999999996).epsilon(1e-12));
    CHECK(est.nie == doctest::Approx(1.5).epsilon(1e-10));
    // with se_theta ~ 0 the delta variance collapses to theta^2 se_beta^2
    CHECK(est.se_delta == doctest::Approx(0.7905694150420958).epsilon(1e-9));
    CHECK(est.ci_delta.first == doctest::Approx(est.nie - 1.96 * est.se_delta).epsilon(1e-12));
    CHECK(est.method == gn::Method::naive);
}

TEST_CASE("naive nie scales with the contrast like the genius one") {
    const auto e10 = mf::nie_naive(fix4(), 1.0, 0.0);
    const auto e40 = mf::nie_naive(fix4(), 4.0, 0.0);
    CHECK(e40.nie == doctest::Approx(4.0 * e10.nie).epsilon(1e-12));
    CHECK(e40.se_delta == doctest::Approx(4.0 * e10.se_delta).epsilon(1e-12));
}

TEST_CASE("oracle estimator demands the latent columns") {
    CHECK_THROWS_AS(mf::nie_oracle(fix4(), 1.0, 0.0), MissingLatentColumns);
}

TEST_CASE("oracle estimator recovers an exactly linear structural outcome") {
    // y = a + m_true - u - w with zero noise: the outcome regression is exact,
    // so the mediator coefficient must be 1 to machine precision
    gn::Dataset d;
    d.a = vec({0, 1, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1});
    d.c = Eigen::MatrixXd(12, 1);
    d.c.col(0) = vec({0.3, -0.1, 0.8, 1.2, -0.4, 0.6, 0.0, -0.9, 0.5, 1.1, -0.2, 0.7});
    Eigen::VectorXd u = vec({0.5, -0.2, 0.1, 0.9, -0.6, 0.3, 0.7, -0.4, 0.2, -0.8, 0.4, 0.0});
    Eigen::VectorXd w = vec({-0.3, 0.6, 0.2, -0.5, 0.8, -0.1, 0.4, 0.9, -0.7, 0.1, 0.5, -0.2});
    Eigen::VectorXd m_true = d.a + u + vec({0.1, -0.2, 0.3, 0.0, 0.2, -0.1, 0.4, -0.3, 0.1, 0.2, -0.4, 0.3});
    d.true_m = m_true;
    d.latent_u = u;
    d.latent_w = w;
    d.m = m_true + vec({0.05, -0.02, 0.01, 0.03, -0.04, 0.02, 0.0, 0.01, -0.03, 0.04, 0.02, -0.01});
    d.y = d.a + m_true - u - w;

    const auto est = mf::nie_oracle(d, 1.0, 0.0);
    CHECK(est.theta_m == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.method == gn::Method::oracle);
    // beta comes from the error-free mediator regression; the product identity holds
    CHECK(est.nie == doctest::Approx(est.theta_m * est.beta_a).epsilon(1e-12));
}

TEST_CASE("oracle falls back to the observed mediator when only latents exist") {
    gn::Dataset d;
    d.a = vec({0, 1, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1});
    d.m = vec({0.2, 1.1, 1.4, 3.1, -0.3, 2.2, 0.9, 0.8, 1.7, 0.4, 2.6, -0.5});
    d.y = vec({0.1, 1.3, 2.2, 4.9, -0.2, 3.8, 1.1, 0.9, 2.4, 0.6, 3.9, -0.7});
    d.c = Eigen::MatrixXd(12, 0);
    d.latent_u = vec({0.5, -0.2, 0.1, 0.9, -0.6, 0.3, 0.7, -0.4, 0.2, -0.8, 0.4, 0.0});
    d.latent_w = vec({-0.3, 0.6, 0.2, -0.5, 0.8, -0.1, 0.4, 0.9, -0.7, 0.1, 0.5, -0.2});
    // no true_m: uses m as is, and the latent columns still enter the design
    const auto est = mf::nie_oracle(d, 1.0, 0.0);
    CHECK(std::isfinite(est.nie));
}

TEST_CASE("discrete table indexing round-trips") {
    auto t = rr_table();
    CHECK(t.counts.size() == 8);
    CHECK(t.at(0, 0, 0, 0) == 5);
    CHECK(t.at(1, 0, 0, 0) == 2);
    CHECK(t.at(0, 1, 0, 0) == 3);
    CHECK(t.at(1, 1, 1, 0) == 7);
    t.at(1, 1, 1, 0) = 9;
    CHECK(t.at(1, 1, 1, 0) == 9);
    CHECK(t.level_of(t.m_levels, "1") == 1);
    CHECK_THROWS_AS(t.level_of(t.m_levels, "2"), InvalidParameter);
}

TEST_CASE("discrete table validation") {
    auto ok = rr_table();
    CHECK_NOTHROW(mf::validate(ok));

    auto empty_levels = rr_table();
    empty_levels.m_levels.clear();
    CHECK_THROWS_AS(mf::validate(empty_levels), InvalidParameter);

    auto wrong_size = rr_table();
    wrong_size.counts.pop_back();
    CHECK_THROWS_AS(mf::validate(wrong_size), DimensionMismatch);

    auto all_zero = rr_table();
    all_zero.counts.assign(8, 0);
    CHECK_THROWS_AS(mf::validate(all_zero), InvalidParameter);

    // an (a, c) stratum with no mass cannot support the conditional frequencies
    auto hole = rr_table();
    hole.counts = {5, 2, 3, 4, 0, 0, 0, 0};
    CHECK_THROWS_AS(mf::validate(hole), EmptyCell);
}

TEST_CASE("risk-ratio plug-in reproduces the worked example") {
    const auto est = mf::rr_nie_plugin(rr_table(), "1", "0", "0");
    CHECK(est.rr == doctest::Approx(1.0862068965517242).epsilon(1e-12));
    CHECK(est.numerator == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(est.denominator == doctest::Approx(29.0 / 63.0).epsilon(1e-12));
    CHECK(est.contrast.first == "1");
    CHECK(est.contrast.second == "0");
    CHECK(est.c_level == "0");
}

TEST_CASE("risk ratio is invariant to count scaling") {
    auto t = rr_table();
    const double base = mf::rr_nie_plugin(t, "1", "0", "0").rr;
    for (auto& c : t.counts) c *= 7;
    CHECK(mf::rr_nie_plugin(t, "1", "0", "0").rr == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("identical contrast levels give a ratio of exactly one") {
    const auto est = mf::rr_nie_plugin(rr_table(), "1", "1", "0");
    CHECK(est.rr == 1.0);
}

TEST_CASE("unknown labels are rejected") {
    const auto t = rr_table();
    CHECK_THROWS_AS(mf::rr_nie_plugin(t, "2", "0", "0"), InvalidParameter);
    CHECK_THROWS_AS(mf::rr_nie_plugin(t, "1", "0", "9"), InvalidParameter);
}

TEST_CASE("swapping the contrast inverts the ratio") {
    const auto fwd = mf::rr_nie_plugin(rr_table(), "1", "0", "0");
    const auto rev = mf::rr_nie_plugin(rr_table(), "0", "1", "0");
    // numerator conditions on exposure a in both Pr(Y|m,a,c) terms, so the
    // reverse ratio is not 1/fwd in general -- but both must be positive and finite
    CHECK(std::isfinite(fwd.rr));
    CHECK(std::isfinite(rev.rr));
    CHECK(fwd.rr > 0.0);
    CHECK(rev.rr > 0.0);
}
