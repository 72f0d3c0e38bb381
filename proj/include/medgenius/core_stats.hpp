#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "medgenius/errors.hpp"

namespace medgenius::core_stats {

struct DesignMatrix {
    Eigen::MatrixXd values; // n x p
    std::vector<std::string> column_names;
    bool has_intercept = false;
};

// Throws DimensionMismatch / InvalidParameter when the matrix breaks its
// invariants (n >= p >= 1, finite entries, intercept column of ones).
void validate(const DesignMatrix& x);

// Convenience builder: prepends an intercept column of ones.
DesignMatrix design_with_intercept(const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns);

enum class Family { linear, logistic };
enum class RobustVariant { hc0, hc1 };

struct RegressionFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd fitted;    // predicted probabilities for logistic
    Eigen::VectorXd residuals; // response - fitted
    Eigen::MatrixXd cov_model;
    Eigen::MatrixXd cov_robust; // HC0
    Family family = Family::linear;
    bool converged = true;
};

RegressionFit ols_fit(const DesignMatrix& x, const Eigen::VectorXd& y);

Eigen::MatrixXd sandwich_cov(const RegressionFit& fit, const DesignMatrix& x,
                             RobustVariant variant = RobustVariant::hc0);

RegressionFit logistic_fit(const DesignMatrix& x, const Eigen::VectorXd& a);

bool is_binary01(const Eigen::VectorXd& v);

// Counter-based substreams: the (seed, stream_id) pair fully determines the
// sequence, so replicate-level draws stay identical no matter how the work is
// scheduled across threads.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();
    double uniform(); // [0, 1)
    double normal(double mean, double sd);
    double bernoulli(double p); // returns 0.0 or 1.0

private:
    std::uint64_t s_[4];
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

struct NormalDist {
    double mean = 0.0;
    double sd = 1.0;
};
struct BernoulliDist {
    double p = 0.5;
};
using Distribution = std::variant<NormalDist, BernoulliDist>;

Eigen::VectorXd sample(const Distribution& dist, RandomStream& stream, Eigen::Index n);

// Upper-tail probability of the chi-square distribution, via the regularized
// incomplete gamma function (series / continued fraction split at a + 1).
double chi_square_sf(double x, int df);

// Type-7 (linear interpolation) sample quantile; copies and sorts.
double quantile(std::vector<double> values, double prob);

} // namespace medgenius::core_stats
