#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "medgenius/core_stats.hpp"

using namespace medgenius;
namespace cs = medgenius::core_stats;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// the little regression everything downstream leans on:
// x = 1..4, y = (1.1, 1.9, 3.2, 3.8), slope 0.94, intercept 0.15
cs::DesignMatrix line_design() {
    return cs::design_with_intercept({{"x", vec({1, 2, 3, 4})}});
}
const Eigen::VectorXd line_y = vec({1.1, 1.9, 3.2, 3.8});

} // namespace

TEST_CASE("ols matches the hand-worked line fit") {
    const auto x = line_design();
    const auto fit = cs::ols_fit(x, line_y);

    CHECK(fit.coefficients[0] == doctest::Approx(0.15000000000000024).epsilon(1e-12));
    CHECK(fit.coefficients[1] == doctest::Approx(0.93999999999999995).epsilon(1e-12));
    CHECK(fit.residuals[0] == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(fit.residuals[1] == doctest::Approx(-0.13).epsilon(1e-9));
    CHECK(fit.residuals[2] == doctest::Approx(0.23).epsilon(1e-9));
    CHECK(fit.residuals[3] == doctest::Approx(-0.11).epsilon(1e-9));
    CHECK(fit.cov_model(0, 0) == doctest::Approx(0.06150000000000011).epsilon(1e-12));
    CHECK(fit.cov_model(0, 1) == doctest::Approx(-0.020500000000000036).epsilon(1e-12));
    CHECK(fit.cov_model(1, 1) == doctest::Approx(0.0082000000000000146).epsilon(1e-12));
}

TEST_CASE("sandwich covariance reproduces frozen hc0 and hc1") {
    const auto x = line_design();
    const auto fit = cs::ols_fit(x, line_y);

    const Eigen::MatrixXd hc0 = cs::sandwich_cov(fit, x, cs::RobustVariant::hc0);
    CHECK(hc0(0, 0) == doctest::Approx(0.007350000000000044).epsilon(1e-12));
    CHECK(hc0(0, 1) == doctest::Approx(-0.0026900000000000162).epsilon(1e-10));
    CHECK(hc0(1, 0) == doctest::Approx(-0.0026900000000000101).epsilon(1e-10));
    CHECK(hc0(1, 1) == doctest::Approx(0.0017960000000000057).epsilon(1e-12));

    // hc1 is the n/(n-p) inflation, here 4/2
    const Eigen::MatrixXd hc1 = cs::sandwich_cov(fit, x, cs::RobustVariant::hc1);
    CHECK(hc1(0, 0) == doctest::Approx(2.0 * hc0(0, 0)).epsilon(1e-14));
    CHECK(hc1(1, 1) == doctest::Approx(2.0 * hc0(1, 1)).epsilon(1e-14));

    // ols_fit already stores the hc0 matrix
    CHECK((fit.cov_robust - hc0).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("sandwich covariance equals the brute-force triple product") {
    // random-ish but fixed data, 3 columns
    cs::RandomStream rs(99, 0);
    const Eigen::Index n = 40;
    Eigen::VectorXd c1(n), c2(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c1[i] = rs.normal(0, 1);
        c2[i] = rs.uniform();
        y[i] = 1.0 + 0.5 * c1[i] - 2.0 * c2[i] + rs.normal(0, 0.3);
    }
    const auto x = cs::design_with_intercept({{"c1", c1}, {"c2", c2}});
    const auto fit = cs::ols_fit(x, y);

    const Eigen::MatrixXd xtx_inv = (x.values.transpose() * x.values).inverse();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd xi = x.values.row(i).transpose();
        meat += xi * xi.transpose() * fit.residuals[i] * fit.residuals[i];
    }
    const Eigen::MatrixXd brute = xtx_inv * meat * xtx_inv;
    CHECK((fit.cov_robust - brute).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols is scale equivariant and refitting fitted values is exact") {
    const auto x = line_design();
    const auto fit = cs::ols_fit(x, line_y);

    const auto scaled = cs::ols_fit(x, (10.0 * line_y.array()).matrix());
    CHECK(scaled.coefficients[0] == doctest::Approx(10.0 * fit.coefficients[0]).epsilon(1e-10));
    CHECK(scaled.coefficients[1] == doctest::Approx(10.0 * fit.coefficients[1]).epsilon(1e-10));

    // projection is idempotent: the fitted values are their own fit
    const auto refit = cs::ols_fit(x, fit.fitted);
    CHECK(refit.coefficients[0] == doctest::Approx(fit.coefficients[0]).epsilon(1e-12));
    CHECK(refit.coefficients[1] == doctest::Approx(fit.coefficients[1]).epsilon(1e-12));
    CHECK(refit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ols rejects rank-deficient designs") {
    const Eigen::VectorXd x1 = vec({1, 2, 3, 4});
    const auto x = cs::design_with_intercept({{"x", x1}, {"2x", (2.0 * x1.array()).matrix()}});
    CHECK_THROWS_AS(cs::ols_fit(x, line_y), RankDeficient);
}

TEST_CASE("design matrix validation catches the obvious breakages") {
    cs::DesignMatrix x = line_design();
    CHECK_NOTHROW(cs::validate(x));

    cs::DesignMatrix wide = x;
    wide.values = Eigen::MatrixXd::Ones(1, 2);
    CHECK_THROWS_AS(cs::validate(wide), DimensionMismatch);

    cs::DesignMatrix names = x;
    names.column_names.pop_back();
    CHECK_THROWS_AS(cs::validate(names), DimensionMismatch);

    cs::DesignMatrix nan = x;
    nan.values(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cs::validate(nan), InvalidParameter);

    cs::DesignMatrix broken = x;
    broken.values(0, 0) = 0.0; // claims an intercept but the column is not all ones
    CHECK_THROWS_AS(cs::validate(broken), InvalidParameter);
}

TEST_CASE("logistic fit reproduces the frozen newton solution") {
    const Eigen::VectorXd x1 = vec({0.5, -1.2, 0.3, 2.0, -0.7, 1.5, -0.2, 0.9});
    const Eigen::VectorXd x2 = vec({1, 0, 1, 1, 0, 0, 1, 0});
    const Eigen::VectorXd a = vec({1, 0, 0, 1, 0, 1, 1, 0});
    const auto x = cs::design_with_intercept({{"x1", x1}, {"x2", x2}});
    const auto fit = cs::logistic_fit(x, a);

    CHECK(fit.converged);
    CHECK(fit.coefficients[0] == doctest::Approx(-2.8891447152154548).epsilon(1e-8));
    CHECK(fit.coefficients[1] == doctest::Approx(2.3819908004905042).epsilon(1e-8));
    CHECK(fit.coefficients[2] == doctest::Approx(3.1893443410708318).epsilon(1e-8));
    CHECK(fit.fitted[0] == doctest::Approx(0.81625757170962721).epsilon(1e-8));
    CHECK(fit.fitted[3] == doctest::Approx(0.99372059738374019).epsilon(1e-8));

    // score equation at the optimum: mean fitted probability = sample mean
    CHECK(fit.fitted.mean() == doctest::Approx(a.mean()).epsilon(1e-10));
}

TEST_CASE("intercept-only logistic recovers the log odds of the mean") {
    Eigen::VectorXd a(8);
    a << 1, 0, 0, 0, 1, 0, 0, 0; // mean 0.25
    cs::DesignMatrix x;
    x.values = Eigen::MatrixXd::Ones(8, 1);
    x.column_names = {"intercept"};
    x.has_intercept = true;
    const auto fit = cs::logistic_fit(x, a);
    CHECK(fit.coefficients[0] == doctest::Approx(-1.0986122886681098).epsilon(1e-10));
}

TEST_CASE("logistic fit refuses degenerate responses") {
    const auto x = cs::design_with_intercept({{"x", vec({1, 2, 3, 4})}});
    CHECK_THROWS_AS(cs::logistic_fit(x, vec({1, 1, 1, 1})), SingleClass);
    CHECK_THROWS_AS(cs::logistic_fit(x, vec({0, 0.5, 1, 1})), InvalidParameter);
    // perfectly separated in x -> coefficients run away
    CHECK_THROWS_AS(cs::logistic_fit(x, vec({0, 0, 1, 1})), Separation);
}

TEST_CASE("is_binary01 sees through the encoding") {
    CHECK(cs::is_binary01(vec({0, 1, 1, 0})));
    CHECK(cs::is_binary01(vec({0, 0, 0, 1})));
    CHECK_FALSE(cs::is_binary01(vec({0, 1, 2})));
    CHECK_FALSE(cs::is_binary01(vec({0, 0.5, 1})));
    CHECK_FALSE(cs::is_binary01(Eigen::VectorXd()));
}

TEST_CASE("random streams are reproducible and stream-separated") {
    cs::RandomStream s1(20250817, 7);
    cs::RandomStream s2(20250817, 7);
    cs::RandomStream s3(20250817, 8);

    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto a = s1.next_u64();
        const auto b = s2.next_u64();
        const auto c = s3.next_u64();
        all_equal = all_equal && (a == b);
        any_diff = any_diff || (a != c);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform draws live in [0,1) and look flat") {
    cs::RandomStream rs(5, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rs.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("normal and bernoulli draws have the right first moments") {
    cs::RandomStream rs(11, 3);
    const int n = 50000;
    double sum = 0.0, sq = 0.0, ones = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rs.normal(2.0, 3.0);
        sum += z;
        sq += (z - 2.0) * (z - 2.0);
        ones += rs.bernoulli(0.3);
    }
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::sqrt(sq / n) == doctest::Approx(3.0).epsilon(0.05));
    CHECK(ones / n == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("sample() dispatches on the distribution variant") {
    cs::RandomStream rs(1, 0);
    const Eigen::VectorXd z = cs::sample(cs::NormalDist{0.0, 1.0}, rs, 100);
    CHECK(z.size() == 100);
    cs::RandomStream rs2(1, 0);
    const Eigen::VectorXd b = cs::sample(cs::BernoulliDist{0.5}, rs2, 100);
    for (Eigen::Index i = 0; i < b.size(); ++i) CHECK((b[i] == 0.0 || b[i] == 1.0));
    CHECK_THROWS_AS(cs::sample(cs::NormalDist{0.0, -1.0}, rs, 10), InvalidParameter);
    CHECK_THROWS_AS(cs::sample(cs::BernoulliDist{1.5}, rs, 10), InvalidParameter);
}

TEST_CASE("chi-square survival function matches frozen references") {
    CHECK(cs::chi_square_sf(3.84, 1) == doctest::Approx(0.050043521248705189).epsilon(1e-12));
    CHECK(cs::chi_square_sf(1.0, 1) == doctest::Approx(0.31731050786291115).epsilon(1e-12));
    CHECK(cs::chi_square_sf(5.99, 2) == doctest::Approx(0.050036627086586287).epsilon(1e-12));
    CHECK(cs::chi_square_sf(0.5, 2) == doctest::Approx(0.77880078307140488).epsilon(1e-12));
    CHECK(cs::chi_square_sf(10.0, 3) == doctest::Approx(0.018566135463043251).epsilon(1e-12));
    CHECK(cs::chi_square_sf(2.3, 5) == doctest::Approx(0.80626686988512852).epsilon(1e-12));
    CHECK(cs::chi_square_sf(50.0, 1) == doctest::Approx(1.5374597944280329e-12).epsilon(1e-9));
    CHECK(cs::chi_square_sf(1e-12, 2) == doctest::Approx(0.99999999999949996).epsilon(1e-12));
}

TEST_CASE("chi-square survival function edge behaviour") {
    CHECK(cs::chi_square_sf(0.0, 1) == 1.0);
    CHECK(cs::chi_square_sf(-3.0, 2) == 1.0); // clamped
    CHECK(cs::chi_square_sf(1e6, 1) >= 0.0);
    CHECK_THROWS_AS(cs::chi_square_sf(std::numeric_limits<double>::quiet_NaN(), 1), InvalidParameter);
    CHECK_THROWS_AS(cs::chi_square_sf(1.0, 0), InvalidParameter);
}

TEST_CASE("type-7 quantile interpolates like everyone expects") {
    CHECK(cs::quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(cs::quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5)); // sorts internally
    CHECK(cs::quantile({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2.0));
    CHECK(cs::quantile({1, 2, 3, 4}, 0.0) == doctest::Approx(1.0));
    CHECK(cs::quantile({1, 2, 3, 4}, 1.0) == doctest::Approx(4.0));
    CHECK(cs::quantile({7}, 0.31) == doctest::Approx(7.0));
    CHECK(cs::quantile({1, 2, 3, 4}, 0.975) == doctest::Approx(3.925));
    CHECK_THROWS_AS(cs::quantile({}, 0.5), EmptyInput);
    CHECK_THROWS_AS(cs::quantile({1, 2}, -0.1), InvalidParameter);
    CHECK_THROWS_AS(cs::quantile({1, 2}, 1.1), InvalidParameter);
}
