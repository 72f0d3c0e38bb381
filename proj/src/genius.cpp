#include "medgenius/genius.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace medgenius::genius {

namespace cs = core_stats;

namespace {

constexpr double kWeakIdEps = 1e-8; // |denominator|/n below eps * sd(A) * sd(M) flags weak id

double sample_sd(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    if (n < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1));
}

bool nonconstant(const Eigen::VectorXd& v) {
    return v.size() > 0 && v.minCoeff() != v.maxCoeff();
}

// First-stage fitted values for E[A|C]: logistic when A is binary, OLS otherwise.
Eigen::VectorXd exposure_stage(const Dataset& d) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
    for (Eigen::Index j = 0; j < d.k(); ++j)
        cols.emplace_back("c" + std::to_string(j), d.c.col(j));
    if (cols.empty()) {
        // intercept-only shortcut: both families reduce to the sample mean
        return Eigen::VectorXd::Constant(d.n(), d.a.mean());
    }
    cs::DesignMatrix x = cs::design_with_intercept(cols);
    if (cs::is_binary01(d.a)) return cs::logistic_fit(x, d.a).fitted;
    return cs::ols_fit(x, d.a).fitted;
}

cs::DesignMatrix mediator_design(const Dataset& d, bool ax_interaction) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
    cols.emplace_back("a", d.a);
    for (Eigen::Index j = 0; j < d.k(); ++j)
        cols.emplace_back("c" + std::to_string(j), d.c.col(j));
    if (ax_interaction)
        for (Eigen::Index j = 0; j < d.k(); ++j)
            cols.emplace_back("a:c" + std::to_string(j), (d.a.array() * d.c.col(j).array()).matrix());
    return cs::design_with_intercept(cols);
}

struct FirstStages {
    Eigen::VectorXd r; // (A - Ahat) .* (M - Mhat)
    cs::RegressionFit m_fit;
    cs::DesignMatrix m_design;
};

FirstStages residual_product(const Dataset& d, bool ax_interaction) {
    FirstStages fs;
    const Eigen::VectorXd ahat = exposure_stage(d);
    fs.m_design = mediator_design(d, ax_interaction);
    fs.m_fit = cs::ols_fit(fs.m_design, d.m);
    fs.r = (d.a - ahat).array() * fs.m_fit.residuals.array();
    return fs;
}

double weak_id_scale(const Dataset& d) {
    return kWeakIdEps * sample_sd(d.a) * sample_sd(d.m);
}

} // namespace

void validate(const Dataset& d) {
    const Eigen::Index n = d.y.size();
    if (n < 1) throw EmptyInput("dataset has no rows");
    if (d.m.size() != n || d.a.size() != n)
        throw DimensionMismatch("outcome, mediator and exposure lengths differ");
    if (d.c.size() > 0 && d.c.rows() != n)
        throw DimensionMismatch("covariate rows do not match dataset length");
    if (!d.y.allFinite() || !d.m.allFinite() || !d.a.allFinite() ||
        (d.c.size() > 0 && !d.c.allFinite()))
        throw InvalidParameter("dataset has non-finite entries");
    for (const auto* opt_col : {&d.latent_u, &d.latent_w, &d.true_m}) {
        if (opt_col->has_value()) {
            if ((*opt_col)->size() != n) throw DimensionMismatch("optional column length mismatch");
            if (!(*opt_col)->allFinite()) throw InvalidParameter("optional column has non-finite entries");
        }
    }
    if (!nonconstant(d.a)) throw InvalidParameter("exposure is constant");
    if (!nonconstant(d.m)) throw InvalidParameter("mediator is constant");
}

GeniusFit genius_theta_m(const Dataset& d, const GeniusOptions& opt) {
    validate(d);
    const auto fs = residual_product(d, opt.first_stage_ax_interaction);
    const Eigen::Index n = d.n();

    GeniusFit fit;
    fit.numerator = fs.r.dot(d.y);
    fit.denominator = fs.r.dot(d.m);
    fit.weak_id = std::abs(fit.denominator) / static_cast<double>(n) < weak_id_scale(d);
    fit.theta_m = fit.numerator / fit.denominator;

    // sandwich of the scalar moment sum_i r_i (y_i - theta m_i) = 0, first
    // stages held fixed
    const Eigen::ArrayXd g = fs.r.array() * (d.y.array() - fit.theta_m * d.m.array());
    fit.se_theta = std::sqrt(g.square().sum()) / std::abs(fit.denominator);

    if (opt.compute_het_test) fit.het_test = het_variance_test(d);
    if (fit.weak_id && opt.throw_on_weak_id)
        throw WeakIdentification("heteroskedasticity moment denominator is numerically zero", fit);
    return fit;
}

GeniusFit genius_theta_interaction(const Dataset& d, const GeniusOptions& opt) {
    validate(d);
    const Eigen::Index n = d.n();
    const Eigen::Index k = d.k();
    if (k < 1) throw InvalidParameter("interaction estimator needs at least one covariate");

    // mediator first stage always carries the A x C terms here
    const auto fs = residual_product(d, true);

    // stacked instrument h(C) = (1, C); unknowns t = (theta_m, theta_mc)
    Eigen::MatrixXd h(n, 1 + k);
    h.col(0).setOnes();
    h.rightCols(k) = d.c;

    Eigen::MatrixXd big_g(1 + k, 1 + k);
    Eigen::VectorXd rhs(1 + k);
    const Eigen::ArrayXd rm = fs.r.array() * d.m.array();
    for (Eigen::Index j = 0; j < 1 + k; ++j) {
        const Eigen::ArrayXd hj = h.col(j).array();
        big_g(j, 0) = (hj * rm).sum();
        for (Eigen::Index l = 0; l < k; ++l)
            big_g(j, 1 + l) = (hj * rm * d.c.col(l).array()).sum();
        rhs[j] = (hj * fs.r.array() * d.y.array()).sum();
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(big_g);
    qr.setThreshold(1e-12);
    if (qr.rank() < 1 + k)
        throw SingularMomentSystem("stacked moment system is singular (collinear instruments)");

    GeniusFit fit;
    fit.numerator = rhs[0];
    fit.denominator = big_g(0, 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(big_g);
    fit.weak_id = svd.singularValues().minCoeff() / static_cast<double>(n) < weak_id_scale(d);

    const Eigen::VectorXd t = qr.solve(rhs);
    fit.theta_m = t[0];
    fit.theta_mc = t.tail(k);

    // GMM sandwich G^-1 S G^-T with S = sum_i h_i h_i' (r_i eps_i)^2
    Eigen::VectorXd eps = d.y - fit.theta_m * d.m;
    for (Eigen::Index l = 0; l < k; ++l)
        eps -= (*fit.theta_mc)[l] * (d.m.array() * d.c.col(l).array()).matrix();
    const Eigen::ArrayXd re = fs.r.array() * eps.array();
    Eigen::MatrixXd s_mat = h.transpose() * re.square().matrix().asDiagonal() * h;
    const Eigen::MatrixXd g_inv = qr.inverse();
    fit.cov_theta = g_inv * s_mat * g_inv.transpose();
    fit.se_theta = std::sqrt(std::max(0.0, (*fit.cov_theta)(0, 0)));

    if (opt.compute_het_test) fit.het_test = het_variance_test(d);
    if (fit.weak_id && opt.throw_on_weak_id)
        throw WeakIdentification("stacked moment system is nearly singular", fit);
    return fit;
}

std::pair<double, double> beta_a_fit(const Dataset& d, cs::RobustVariant variant) {
    validate(d);
    const cs::DesignMatrix x = mediator_design(d, false);
    const cs::RegressionFit fit = cs::ols_fit(x, d.m);
    const Eigen::MatrixXd cov = cs::sandwich_cov(fit, x, variant);
    return {fit.coefficients[1], std::sqrt(std::max(0.0, cov(1, 1)))};
}

double delta_var(double theta_m, double se_theta, double beta_a, double se_beta, double scale) {
    if (se_theta < 0.0 || se_beta < 0.0) throw InvalidParameter("standard errors must be nonnegative");
    return scale * scale *
           (beta_a * beta_a * se_theta * se_theta + theta_m * theta_m * se_beta * se_beta);
}

namespace {

void attach_ci_delta(NieEstimate& est) {
    est.ci_delta = {est.nie - 1.96 * est.se_delta, est.nie + 1.96 * est.se_delta};
}

void attach_bootstrap(NieEstimate& est, const Dataset& d, const Inference& inference,
                      const std::function<double(const Dataset&)>& point) {
    if (!inference.bootstrap) return;
    BootstrapResult boot = bootstrap_nie(d, inference.B, inference.seed, point, inference.boot_ci);
    est.se_bootstrap = boot.se;
    est.ci_bootstrap = boot.ci;
    est.bootstrap_failures = boot.failures;
}

} // namespace

NieEstimate nie_genius(const Dataset& d, double a, double a_star,
                       const Inference& inference, const GeniusOptions& opt) {
    NieEstimate est;
    est.method = Method::genius;
    est.contrast = {a, a_star};

    GeniusFit fit = genius_theta_m(d, opt);
    const auto [beta, se_beta] = beta_a_fit(d, opt.robust);
    est.theta_m = fit.theta_m;
    est.beta_a = beta;
    est.nie = fit.theta_m * beta * (a - a_star);
    est.se_delta = std::sqrt(delta_var(fit.theta_m, fit.se_theta, beta, se_beta, a - a_star));
    attach_ci_delta(est);

    GeniusOptions boot_opt = opt;
    boot_opt.compute_het_test = false;
    boot_opt.throw_on_weak_id = true;
    attach_bootstrap(est, d, inference, [a, a_star, boot_opt](const Dataset& resampled) {
        const GeniusFit f = genius_theta_m(resampled, boot_opt);
        return f.theta_m * beta_a_fit(resampled, boot_opt.robust).first * (a - a_star);
    });
    est.fit = std::move(fit);
    return est;
}

double nie_interaction_value(double theta_m, const Eigen::VectorXd& theta_mc,
                             double beta_a, const Eigen::VectorXd& beta_ac,
                             const Eigen::VectorXd& c_mean, const Eigen::MatrixXd& c_cross,
                             double a, double a_star) {
    const double term_m = theta_m * (beta_a + beta_ac.dot(c_mean));
    const double term_mc = theta_mc.dot(beta_a * c_mean + c_cross * beta_ac);
    return (a - a_star) * (term_m + term_mc);
}

NieEstimate nie_interaction(const Dataset& d, double a, double a_star,
                            const Inference& inference, const GeniusOptions& opt) {
    NieEstimate est;
    est.method = Method::genius_interaction;
    est.contrast = {a, a_star};

    GeniusFit fit = genius_theta_interaction(d, opt);
    const Eigen::Index k = d.k();

    // mediator model M ~ 1 + A + C + A x C supplies beta_a and beta_ac
    const cs::DesignMatrix x = mediator_design(d, true);
    const cs::RegressionFit m_fit = cs::ols_fit(x, d.m);
    const Eigen::MatrixXd cov_m = cs::sandwich_cov(m_fit, x, opt.robust);
    const double beta_a = m_fit.coefficients[1];
    const Eigen::VectorXd beta_ac = m_fit.coefficients.segment(2 + k, k);

    const Eigen::VectorXd c_mean = d.c.colwise().mean();
    const Eigen::MatrixXd c_cross = (d.c.transpose() * d.c) / static_cast<double>(d.n());

    est.theta_m = fit.theta_m;
    est.theta_mc = fit.theta_mc;
    est.beta_a = beta_a;
    est.beta_ac = beta_ac;
    est.nie = nie_interaction_value(fit.theta_m, *fit.theta_mc, beta_a, beta_ac,
                                    c_mean, c_cross, a, a_star);

    // first-order delta over (theta_m, theta_mc, beta_a, beta_ac); the theta
    // block comes from the GMM sandwich, the beta block from the OLS sandwich,
    // treated as independent with the C moments fixed
    Eigen::VectorXd grad(2 * (1 + k));
    grad[0] = beta_a + beta_ac.dot(c_mean);
    grad.segment(1, k) = beta_a * c_mean + c_cross * beta_ac;
    grad[1 + k] = fit.theta_m + fit.theta_mc->dot(c_mean);
    grad.segment(2 + k, k) = fit.theta_m * c_mean + c_cross * *fit.theta_mc;

    Eigen::MatrixXd big_cov = Eigen::MatrixXd::Zero(2 * (1 + k), 2 * (1 + k));
    big_cov.topLeftCorner(1 + k, 1 + k) = *fit.cov_theta;
    Eigen::MatrixXd cov_beta(1 + k, 1 + k);
    cov_beta(0, 0) = cov_m(1, 1);
    cov_beta.block(0, 1, 1, k) = cov_m.block(1, 2 + k, 1, k);
    cov_beta.block(1, 0, k, 1) = cov_m.block(2 + k, 1, k, 1);
    cov_beta.block(1, 1, k, k) = cov_m.block(2 + k, 2 + k, k, k);
    big_cov.bottomRightCorner(1 + k, 1 + k) = cov_beta;

    const double scale = a - a_star;
    est.se_delta = std::sqrt(std::max(0.0, scale * scale * grad.dot(big_cov * grad)));
    attach_ci_delta(est);

    GeniusOptions boot_opt = opt;
    boot_opt.compute_het_test = false;
    boot_opt.throw_on_weak_id = true;
    attach_bootstrap(est, d, inference, [a, a_star, boot_opt](const Dataset& resampled) {
        return nie_interaction(resampled, a, a_star, Inference{}, boot_opt).nie;
    });
    est.fit = std::move(fit);
    return est;
}

namespace {

Dataset resample_rows(const Dataset& d, cs::RandomStream& stream) {
    const Eigen::Index n = d.n();
    Dataset out;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (auto& i : idx)
        i = std::min<Eigen::Index>(static_cast<Eigen::Index>(stream.uniform() * static_cast<double>(n)), n - 1);

    auto gather = [&](const Eigen::VectorXd& src) {
        Eigen::VectorXd dst(n);
        for (Eigen::Index i = 0; i < n; ++i) dst[i] = src[idx[static_cast<std::size_t>(i)]];
        return dst;
    };
    out.y = gather(d.y);
    out.m = gather(d.m);
    out.a = gather(d.a);
    if (d.c.size() > 0) {
        out.c.resize(n, d.k());
        for (Eigen::Index i = 0; i < n; ++i) out.c.row(i) = d.c.row(idx[static_cast<std::size_t>(i)]);
    } else {
        out.c.resize(n, 0);
    }
    if (d.latent_u) out.latent_u = gather(*d.latent_u);
    if (d.latent_w) out.latent_w = gather(*d.latent_w);
    if (d.true_m) out.true_m = gather(*d.true_m);
    return out;
}

} // namespace

BootstrapResult bootstrap_nie(const Dataset& d, std::size_t B, std::uint64_t seed,
                              const std::function<double(const Dataset&)>& point_estimator,
                              BootCi ci_kind) {
    validate(d);
    if (B < 100) throw InvalidParameter("bootstrap needs B >= 100");

    BootstrapResult result;
    result.replicates.reserve(B);
    for (std::size_t b = 0; b < B; ++b) {
        cs::RandomStream stream(seed, b);
        Dataset resampled = resample_rows(d, stream);
        try {
            result.replicates.push_back(point_estimator(resampled));
        } catch (const Error&) {
            ++result.failures;
        }
    }
    if (result.failures * 10 > B)
        throw TooManyFailures("more than 10% of bootstrap resamples failed (" +
                              std::to_string(result.failures) + "/" + std::to_string(B) + ")");

    const auto used = result.replicates.size();
    if (used >= 2) {
        const double mean = std::accumulate(result.replicates.begin(), result.replicates.end(), 0.0) /
                            static_cast<double>(used);
        double ss = 0.0;
        for (double v : result.replicates) ss += (v - mean) * (v - mean);
        result.se = std::sqrt(ss / static_cast<double>(used - 1));
    }
    if (used >= 1) {
        if (ci_kind == BootCi::percentile) {
            result.ci = {cs::quantile(result.replicates, 0.025),
                         cs::quantile(result.replicates, 0.975)};
        } else {
            const double center = point_estimator(d);
            result.ci = {center - 1.96 * result.se, center + 1.96 * result.se};
        }
    }
    return result;
}

BootstrapResult bootstrap_nie(const Dataset& d, double a, double a_star,
                              std::size_t B, std::uint64_t seed, BootCi ci_kind) {
    GeniusOptions opt;
    opt.compute_het_test = false;
    return bootstrap_nie(d, B, seed, [a, a_star, opt](const Dataset& resampled) {
        const GeniusFit f = genius_theta_m(resampled, opt);
        return f.theta_m * beta_a_fit(resampled).first * (a - a_star);
    }, ci_kind);
}

HetTestResult het_variance_test(const Dataset& d) {
    const Eigen::Index n = d.y.size();
    if (d.m.size() != n || d.a.size() != n || (d.c.size() > 0 && d.c.rows() != n))
        throw DimensionMismatch("mediator/exposure/covariate lengths differ");
    if (!nonconstant(d.a)) throw RankDeficient("exposure is constant, variance test design is singular");

    const cs::DesignMatrix x = mediator_design(d, false);
    const cs::RegressionFit m_fit = cs::ols_fit(x, d.m);
    const Eigen::VectorXd e2 = m_fit.residuals.array().square();
    const cs::RegressionFit aux = cs::ols_fit(x, e2);

    const double tss = (e2.array() - e2.mean()).square().sum();
    const double rss = aux.residuals.squaredNorm();
    const double r2 = tss > 0.0 ? std::max(0.0, 1.0 - rss / tss) : 0.0;

    HetTestResult result;
    result.df = static_cast<int>(x.values.cols()) - 1;
    result.statistic = static_cast<double>(n) * r2;
    result.p_value = cs::chi_square_sf(result.statistic, result.df);

    if (d.k() == 0 && cs::is_binary01(d.a)) {
        for (double level : {0.0, 1.0}) {
            double sum = 0.0, sum2 = 0.0;
            Eigen::Index count = 0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (d.a[i] == level) {
                    sum += m_fit.residuals[i];
                    sum2 += m_fit.residuals[i] * m_fit.residuals[i];
                    ++count;
                }
            }
            if (count > 0) {
                const double mean = sum / static_cast<double>(count);
                result.variance_by_level[level] = sum2 / static_cast<double>(count) - mean * mean;
            }
        }
    }
    return result;
}

} // namespace medgenius::genius
