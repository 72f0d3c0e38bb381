#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "medgenius/core_stats.hpp"
#include "medgenius/errors.hpp"

namespace medgenius::genius {

struct Dataset {
    Eigen::VectorXd y; // outcome
    Eigen::VectorXd m; // mediator as observed (possibly mismeasured)
    Eigen::VectorXd a; // exposure, binary or continuous
    Eigen::MatrixXd c; // n x k observed covariates, k >= 0
    std::optional<Eigen::VectorXd> latent_u; // mediator-outcome confounder (simulation oracle)
    std::optional<Eigen::VectorXd> latent_w; // exposure-outcome confounder (simulation oracle)
    std::optional<Eigen::VectorXd> true_m;   // error-free mediator (simulation oracle)

    Eigen::Index n() const { return y.size(); }
    Eigen::Index k() const { return c.cols(); }
};

void validate(const Dataset& d);

struct HetTestResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    std::map<double, double> variance_by_level; // binary exposure, no covariates
};

struct GeniusFit {
    double theta_m = 0.0;
    std::optional<Eigen::VectorXd> theta_mc; // interaction extension
    double se_theta = 0.0;
    double numerator = 0.0;   // sum_i (A_i - Ahat_i)(M_i - Mhat_i) Y_i
    double denominator = 0.0; // sum_i (A_i - Ahat_i)(M_i - Mhat_i) M_i
    bool weak_id = false;
    std::optional<HetTestResult> het_test;
    std::optional<Eigen::MatrixXd> cov_theta; // (theta_m, theta_mc) sandwich, interaction fit only
};

// Carries the (flagged) fit so callers can still report diagnostics.
struct WeakIdentification : Error {
    GeniusFit fit;
    WeakIdentification(const std::string& msg, GeniusFit f)
        : Error(msg), fit(std::move(f)) {}
};

struct GeniusOptions {
    bool first_stage_ax_interaction = false; // add A x C terms to the mediator first stage
    bool compute_het_test = true;            // skipped inside bootstrap loops
    bool throw_on_weak_id = true;
    core_stats::RobustVariant robust = core_stats::RobustVariant::hc0;
};

GeniusFit genius_theta_m(const Dataset& d, const GeniusOptions& opt = {});

// Stacked instrument h(C) = (1, C): solves the (1+k)-dimensional linear moment
// system for (theta_m, theta_mc).
GeniusFit genius_theta_interaction(const Dataset& d, const GeniusOptions& opt = {});

// OLS coefficient on A from M ~ 1 + A + C, with robust (sandwich) SE.
std::pair<double, double> beta_a_fit(const Dataset& d,
                                     core_stats::RobustVariant variant = core_stats::RobustVariant::hc0);

// (a - a_star)^2 * (beta^2 se_theta^2 + theta^2 se_beta^2)
double delta_var(double theta_m, double se_theta, double beta_a, double se_beta, double scale);

enum class Method { naive, genius, genius_interaction, oracle };

struct Contrast {
    double a = 1.0;
    double a_star = 0.0;
};

enum class BootCi { percentile, normal };

struct Inference {
    bool bootstrap = false;
    std::size_t B = 200;
    std::uint64_t seed = 1;
    BootCi boot_ci = BootCi::percentile;
};

struct BootstrapResult {
    double se = 0.0;
    std::pair<double, double> ci{0.0, 0.0};
    std::vector<double> replicates;
    std::size_t failures = 0;
};

struct NieEstimate {
    double nie = 0.0;
    Contrast contrast;
    double theta_m = 0.0;
    double beta_a = 0.0;
    std::optional<Eigen::VectorXd> theta_mc; // interaction method only
    std::optional<Eigen::VectorXd> beta_ac;  // interaction method only
    double se_delta = 0.0;
    std::optional<double> se_bootstrap;
    std::pair<double, double> ci_delta{0.0, 0.0};
    std::optional<std::pair<double, double>> ci_bootstrap;
    Method method = Method::genius;
    std::optional<GeniusFit> fit; // diagnostics (weak_id, het_test) for reports
    std::size_t bootstrap_failures = 0;
};

NieEstimate nie_genius(const Dataset& d, double a, double a_star,
                       const Inference& inference = {}, const GeniusOptions& opt = {});

NieEstimate nie_interaction(const Dataset& d, double a, double a_star,
                            const Inference& inference = {}, const GeniusOptions& opt = {});

// Assembly of the interaction-extended NIE from its components; exposed so the
// zero-interaction reduction is testable without refitting.
double nie_interaction_value(double theta_m, const Eigen::VectorXd& theta_mc,
                             double beta_a, const Eigen::VectorXd& beta_ac,
                             const Eigen::VectorXd& c_mean, const Eigen::MatrixXd& c_cross,
                             double a, double a_star);

// Nonparametric bootstrap of an arbitrary NIE point estimator. Replicate b
// resamples rows with RandomStream(seed, b); failed replicates are dropped and
// counted, > 10% failures raises TooManyFailures.
BootstrapResult bootstrap_nie(const Dataset& d, std::size_t B, std::uint64_t seed,
                              const std::function<double(const Dataset&)>& point_estimator,
                              BootCi ci_kind = BootCi::percentile);

// Convenience overload for the genius estimator itself.
BootstrapResult bootstrap_nie(const Dataset& d, double a, double a_star,
                              std::size_t B, std::uint64_t seed,
                              BootCi ci_kind = BootCi::percentile);

// Score-type test of exposure-driven residual heteroskedasticity in the
// mediator regression: n * R^2 of e^2 on (1, A, C) against chi-square(df).
HetTestResult het_variance_test(const Dataset& d);

} // namespace medgenius::genius
