#include "medgenius/mediation_formula.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace medgenius::mediation_formula {

namespace cs = core_stats;
using genius::GeniusOptions;

namespace {

struct ProductFit {
    double theta = 0.0;
    double se_theta = 0.0;
    double beta = 0.0;
    double se_beta = 0.0;
};

cs::DesignMatrix outcome_design_naive(const Dataset& d) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
    cols.emplace_back("m", d.m);
    cols.emplace_back("a", d.a);
    for (Eigen::Index j = 0; j < d.k(); ++j)
        cols.emplace_back("c" + std::to_string(j), d.c.col(j));
    return cs::design_with_intercept(cols);
}

cs::DesignMatrix outcome_design_oracle(const Dataset& d, const Eigen::VectorXd& m_used) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
    cols.emplace_back("m", m_used);
    cols.emplace_back("a", d.a);
    if (d.latent_u) cols.emplace_back("u", *d.latent_u);
    if (d.latent_w) cols.emplace_back("w", *d.latent_w);
    for (Eigen::Index j = 0; j < d.k(); ++j)
        cols.emplace_back("c" + std::to_string(j), d.c.col(j));
    return cs::design_with_intercept(cols);
}

cs::DesignMatrix mediator_design(const Dataset& d) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
    cols.emplace_back("a", d.a);
    for (Eigen::Index j = 0; j < d.k(); ++j)
        cols.emplace_back("c" + std::to_string(j), d.c.col(j));
    return cs::design_with_intercept(cols);
}

ProductFit product_fit(const cs::DesignMatrix& outcome_x, const Eigen::VectorXd& y,
                       const cs::DesignMatrix& mediator_x, const Eigen::VectorXd& m) {
    ProductFit pf;
    const cs::RegressionFit y_fit = cs::ols_fit(outcome_x, y);
    pf.theta = y_fit.coefficients[1]; // coefficient on the mediator column
    pf.se_theta = std::sqrt(std::max(0.0, y_fit.cov_robust(1, 1)));
    const cs::RegressionFit m_fit = cs::ols_fit(mediator_x, m);
    pf.beta = m_fit.coefficients[1]; // coefficient on the exposure column
    pf.se_beta = std::sqrt(std::max(0.0, m_fit.cov_robust(1, 1)));
    return pf;
}

NieEstimate assemble(const ProductFit& pf, double a, double a_star, genius::Method method) {
    NieEstimate est;
    est.method = method;
    est.contrast = {a, a_star};
    est.theta_m = pf.theta;
    est.beta_a = pf.beta;
    est.nie = pf.theta * pf.beta * (a - a_star);
    est.se_delta = std::sqrt(genius::delta_var(pf.theta, pf.se_theta, pf.beta, pf.se_beta, a - a_star));
    est.ci_delta = {est.nie - 1.96 * est.se_delta, est.nie + 1.96 * est.se_delta};
    return est;
}

void maybe_bootstrap(NieEstimate& est, const Dataset& d, const Inference& inference,
                     const std::function<double(const Dataset&)>& point) {
    if (!inference.bootstrap) return;
    genius::BootstrapResult boot =
        genius::bootstrap_nie(d, inference.B, inference.seed, point, inference.boot_ci);
    est.se_bootstrap = boot.se;
    est.ci_bootstrap = boot.ci;
    est.bootstrap_failures = boot.failures;
}

double naive_point(const Dataset& d, double a, double a_star) {
    const ProductFit pf = product_fit(outcome_design_naive(d), d.y, mediator_design(d), d.m);
    return pf.theta * pf.beta * (a - a_star);
}

double oracle_point(const Dataset& d, double a, double a_star) {
    const Eigen::VectorXd& m_used = d.true_m ? *d.true_m : d.m;
    const ProductFit pf = product_fit(outcome_design_oracle(d, m_used), d.y, mediator_design(d), m_used);
    return pf.theta * pf.beta * (a - a_star);
}

} // namespace

NieEstimate nie_naive(const Dataset& d, double a, double a_star, const Inference& inference) {
    genius::validate(d);
    const ProductFit pf = product_fit(outcome_design_naive(d), d.y, mediator_design(d), d.m);
    NieEstimate est = assemble(pf, a, a_star, genius::Method::naive);
    maybe_bootstrap(est, d, inference,
                    [a, a_star](const Dataset& resampled) { return naive_point(resampled, a, a_star); });
    return est;
}

NieEstimate nie_oracle(const Dataset& d, double a, double a_star, const Inference& inference) {
    genius::validate(d);
    if (!d.latent_u && !d.latent_w && !d.true_m)
        throw MissingLatentColumns("oracle estimator needs latent_u, latent_w or true_m");
    const Eigen::VectorXd& m_used = d.true_m ? *d.true_m : d.m;
    const ProductFit pf =
        product_fit(outcome_design_oracle(d, m_used), d.y, mediator_design(d), m_used);
    NieEstimate est = assemble(pf, a, a_star, genius::Method::oracle);
    maybe_bootstrap(est, d, inference,
                    [a, a_star](const Dataset& resampled) { return oracle_point(resampled, a, a_star); });
    return est;
}

std::size_t DiscreteMediationTable::index(int y, std::size_t mi, std::size_t ai, std::size_t ci) const {
    return ((ci * a_levels.size() + ai) * m_levels.size() + mi) * 2 + static_cast<std::size_t>(y);
}

std::uint64_t& DiscreteMediationTable::at(int y, std::size_t mi, std::size_t ai, std::size_t ci) {
    return counts[index(y, mi, ai, ci)];
}

std::uint64_t DiscreteMediationTable::at(int y, std::size_t mi, std::size_t ai, std::size_t ci) const {
    return counts[index(y, mi, ai, ci)];
}

std::size_t DiscreteMediationTable::level_of(const std::vector<std::string>& levels,
                                             const std::string& label) const {
    const auto it = std::find(levels.begin(), levels.end(), label);
    if (it == levels.end()) throw InvalidParameter("unknown level label '" + label + "'");
    return static_cast<std::size_t>(it - levels.begin());
}

void validate(const DiscreteMediationTable& t) {
    if (t.m_levels.empty() || t.a_levels.empty() || t.c_levels.empty())
        throw InvalidParameter("mediation table needs at least one level per factor");
    if (t.counts.size() != 2 * t.m_levels.size() * t.a_levels.size() * t.c_levels.size())
        throw DimensionMismatch("count array does not match level layout");
    std::uint64_t total = 0;
    for (std::uint64_t c : t.counts) total += c;
    if (total == 0) throw InvalidParameter("mediation table is empty");
    for (std::size_t ci = 0; ci < t.c_levels.size(); ++ci) {
        for (std::size_t ai = 0; ai < t.a_levels.size(); ++ai) {
            std::uint64_t mass = 0;
            for (std::size_t mi = 0; mi < t.m_levels.size(); ++mi)
                mass += t.at(0, mi, ai, ci) + t.at(1, mi, ai, ci);
            if (mass == 0)
                throw EmptyCell("exposure level '" + t.a_levels[ai] + "' has no mass at c='" +
                                t.c_levels[ci] + "'");
        }
    }
}

RrNieEstimate rr_nie_plugin(const DiscreteMediationTable& t, const std::string& a,
                            const std::string& a_star, const std::string& c) {
    validate(t);
    const std::size_t ai = t.level_of(t.a_levels, a);
    const std::size_t asi = t.level_of(t.a_levels, a_star);
    const std::size_t ci = t.level_of(t.c_levels, c);

    auto cell_mass = [&](std::size_t mi, std::size_t arm) {
        return t.at(0, mi, arm, ci) + t.at(1, mi, arm, ci);
    };
    std::uint64_t n_a = 0, n_astar = 0;
    for (std::size_t mi = 0; mi < t.m_levels.size(); ++mi) {
        n_a += cell_mass(mi, ai);
        n_astar += cell_mass(mi, asi);
    }

    RrNieEstimate est;
    est.contrast = {a, a_star};
    est.c_level = c;
    for (std::size_t mi = 0; mi < t.m_levels.size(); ++mi) {
        const std::uint64_t n_mac = cell_mass(mi, ai);
        const std::uint64_t n_mastarc = cell_mass(mi, asi);
        const double f_a = static_cast<double>(n_mac) / static_cast<double>(n_a);
        const double f_astar = static_cast<double>(n_mastarc) / static_cast<double>(n_astar);
        if (f_a == 0.0 && f_astar == 0.0) continue;
        if (n_mac == 0)
            throw EmptyCell("Pr(Y=1 | m='" + t.m_levels[mi] + "', a='" + a + "', c='" + c +
                            "') is undefined: empty cell");
        const double pr_y1 = static_cast<double>(t.at(1, mi, ai, ci)) / static_cast<double>(n_mac);
        est.numerator += pr_y1 * f_a;
        est.denominator += pr_y1 * f_astar;
    }
    est.rr = est.numerator / est.denominator;
    return est;
}

} // namespace medgenius::mediation_formula
