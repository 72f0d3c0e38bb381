#include "medgenius/core_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace medgenius::core_stats {

namespace {

constexpr double kRankThreshold = 1e-12; // relative pivot threshold
constexpr double kLogLikTol = 1e-10;
constexpr int kIrlsMaxIter = 100;
constexpr double kSeparationBound = 30.0; // |coef| beyond this means separation

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_checked_qr(const Eigen::MatrixXd& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < x.cols())
        throw RankDeficient("design matrix is rank deficient (rank " +
                            std::to_string(qr.rank()) + " < " + std::to_string(x.cols()) + ")");
    return qr;
}

// (X'X)^-1 from the pivoted QR: X P = Q R  =>  (X'X)^-1 = P R^-1 R^-T P'.
Eigen::MatrixXd xtx_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
    const Eigen::Index p = qr.matrixQR().cols();
    Eigen::MatrixXd rinv = qr.matrixQR()
                               .topLeftCorner(p, p)
                               .triangularView<Eigen::Upper>()
                               .solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd base = rinv * rinv.transpose();
    return qr.colsPermutation() * base * qr.colsPermutation().transpose();
}

Eigen::MatrixXd meat_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals) {
    return x.transpose() * residuals.array().square().matrix().asDiagonal() * x;
}

double log1pexp(double eta) {
    // log(1 + e^eta) without overflow
    if (eta > 33.0) return eta;
    if (eta < -33.0) return std::exp(eta);
    return std::log1p(std::exp(eta));
}

} // namespace

void validate(const DesignMatrix& x) {
    const Eigen::Index n = x.values.rows();
    const Eigen::Index p = x.values.cols();
    if (p < 1) throw InvalidParameter("design matrix needs at least one column");
    if (n < p) throw DimensionMismatch("design matrix has fewer rows than columns");
    if (!x.column_names.empty() && static_cast<Eigen::Index>(x.column_names.size()) != p)
        throw DimensionMismatch("column_names length does not match column count");
    if (!x.values.allFinite()) throw InvalidParameter("design matrix has non-finite entries");
    if (x.has_intercept && (x.values.col(0).array() != 1.0).any())
        throw InvalidParameter("has_intercept set but column 0 is not identically 1");
}

DesignMatrix design_with_intercept(const std::vector<std::pair<std::string, Eigen::VectorXd>>& columns) {
    if (columns.empty()) throw InvalidParameter("need at least one column to size the intercept");
    const Eigen::Index n = columns.front().second.size();
    DesignMatrix x;
    x.values.resize(n, static_cast<Eigen::Index>(columns.size()) + 1);
    x.values.col(0).setOnes();
    x.column_names.push_back("(intercept)");
    Eigen::Index j = 1;
    for (const auto& [name, col] : columns) {
        if (col.size() != n) throw DimensionMismatch("column '" + name + "' has mismatched length");
        x.values.col(j++) = col;
        x.column_names.push_back(name);
    }
    x.has_intercept = true;
    return x;
}

RegressionFit ols_fit(const DesignMatrix& x, const Eigen::VectorXd& y) {
    validate(x);
    const Eigen::Index n = x.values.rows();
    const Eigen::Index p = x.values.cols();
    if (y.size() != n) throw DimensionMismatch("response length does not match design rows");
    if (!y.allFinite()) throw InvalidParameter("response has non-finite entries");

    auto qr = rank_checked_qr(x.values);
    RegressionFit fit;
    fit.family = Family::linear;
    fit.coefficients = qr.solve(y);
    fit.fitted = x.values * fit.coefficients;
    fit.residuals = y - fit.fitted;

    const Eigen::MatrixXd xtx_inv = xtx_inverse(qr);
    const double rss = fit.residuals.squaredNorm();
    const double sigma2 = (n > p) ? rss / static_cast<double>(n - p) : 0.0;
    fit.cov_model = sigma2 * xtx_inv;
    fit.cov_robust = xtx_inv * meat_matrix(x.values, fit.residuals) * xtx_inv;
    fit.converged = true;
    return fit;
}

Eigen::MatrixXd sandwich_cov(const RegressionFit& fit, const DesignMatrix& x, RobustVariant variant) {
    validate(x);
    if (fit.family != Family::linear)
        throw InvalidParameter("sandwich_cov expects a linear-family fit");
    const Eigen::Index n = x.values.rows();
    const Eigen::Index p = x.values.cols();
    if (fit.residuals.size() != n)
        throw DimensionMismatch("fit residuals do not match design rows");

    auto qr = rank_checked_qr(x.values);
    const Eigen::MatrixXd xtx_inv = xtx_inverse(qr);
    Eigen::MatrixXd cov = xtx_inv * meat_matrix(x.values, fit.residuals) * xtx_inv;
    if (variant == RobustVariant::hc1) {
        if (n <= p) throw InvalidParameter("HC1 correction undefined when n <= p");
        cov *= static_cast<double>(n) / static_cast<double>(n - p);
    }
    return cov;
}

RegressionFit logistic_fit(const DesignMatrix& x, const Eigen::VectorXd& a) {
    validate(x);
    const Eigen::Index n = x.values.rows();
    const Eigen::Index p = x.values.cols();
    if (a.size() != n) throw DimensionMismatch("response length does not match design rows");
    if (!is_binary01(a)) throw InvalidParameter("logistic response must be coded 0/1");
    const double abar = a.mean();
    if (abar <= 0.0 || abar >= 1.0) throw SingleClass("logistic response has a single class");

    rank_checked_qr(x.values); // catch collinearity up front

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd prob = Eigen::VectorXd::Constant(n, 0.5);
    double ll_old = -std::numeric_limits<double>::infinity();
    bool converged = false;

    for (int iter = 0; iter < kIrlsMaxIter; ++iter) {
        // Newton step via weighted least squares on sqrt(w)-scaled rows
        Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
        Eigen::VectorXd sw = w.array().max(1e-10).sqrt();
        Eigen::MatrixXd xw = sw.asDiagonal() * x.values;
        Eigen::VectorXd z = sw.asDiagonal() * (eta + ((a - prob).array() / w.array().max(1e-10)).matrix());
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
        qr.setThreshold(kRankThreshold);
        if (qr.rank() < p) throw RankDeficient("weighted design lost rank during IRLS");
        beta = qr.solve(z);

        if (beta.array().abs().maxCoeff() > kSeparationBound)
            throw Separation("logistic coefficients diverged (|coef| > 30), data are separated");

        eta = x.values * beta;
        prob = 1.0 / (1.0 + (-eta.array()).exp());
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) ll += a[i] * eta[i] - log1pexp(eta[i]);
        if (std::abs(ll - ll_old) < kLogLikTol * (std::abs(ll) + 1.0)) {
            converged = true;
            break;
        }
        ll_old = ll;
    }

    RegressionFit fit;
    fit.family = Family::logistic;
    fit.coefficients = beta;
    fit.fitted = prob;
    fit.residuals = a - prob;
    fit.converged = converged;

    Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd info = x.values.transpose() * w.asDiagonal() * x.values;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::MatrixXd info_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.cov_model = info_inv;
    fit.cov_robust = info_inv * meat_matrix(x.values, fit.residuals) * info_inv;
    return fit;
}

bool is_binary01(const Eigen::VectorXd& v) {
    return v.size() > 0 && ((v.array() == 0.0) || (v.array() == 1.0)).all();
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
    // xoshiro256++ state derived from (seed, stream_id) through splitmix64
    std::uint64_t key = seed ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1));
    for (auto& word : s_) word = splitmix64(key);
}

std::uint64_t RandomStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RandomStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal(double mean, double sd) {
    if (!(sd > 0.0)) throw InvalidParameter("normal draws need sd > 0");
    // Box-Muller, cosine branch only: fixed two-uniform cost keeps substreams aligned
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * M_PI * u2);
}

double RandomStream::bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw InvalidParameter("bernoulli p outside [0, 1]");
    return uniform() < p ? 1.0 : 0.0;
}

Eigen::VectorXd sample(const Distribution& dist, RandomStream& stream, Eigen::Index n) {
    if (n < 0) throw InvalidParameter("sample size must be nonnegative");
    Eigen::VectorXd out(n);
    if (const auto* normal = std::get_if<NormalDist>(&dist)) {
        if (!(normal->sd > 0.0)) throw InvalidParameter("normal draws need sd > 0");
        for (Eigen::Index i = 0; i < n; ++i) out[i] = stream.normal(normal->mean, normal->sd);
    } else {
        const auto& bern = std::get<BernoulliDist>(dist);
        if (bern.p < 0.0 || bern.p > 1.0) throw InvalidParameter("bernoulli p outside [0, 1]");
        for (Eigen::Index i = 0; i < n; ++i) out[i] = stream.bernoulli(bern.p);
    }
    return out;
}

namespace {

// Regularized lower incomplete gamma P(a, x) by series (x < a + 1).
double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int k = 1; k < 500; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by Lentz continued fraction (x >= a + 1).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int k = 1; k < 500; ++k) {
        const double an = -static_cast<double>(k) * (static_cast<double>(k) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

} // namespace

double chi_square_sf(double x, int df) {
    if (df < 1) throw InvalidParameter("chi-square df must be >= 1");
    if (!(x >= 0.0)) {
        if (std::isnan(x)) throw InvalidParameter("chi-square statistic is NaN");
        return 1.0;
    }
    if (x == 0.0) return 1.0;
    const double a = 0.5 * df;
    const double half = 0.5 * x;
    double q = (half < a + 1.0) ? 1.0 - gamma_p_series(a, half) : gamma_q_cf(a, half);
    return std::min(1.0, std::max(0.0, q));
}

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) throw EmptyInput("quantile of an empty sample");
    if (prob < 0.0 || prob > 1.0) throw InvalidParameter("quantile probability outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

} // namespace medgenius::core_stats
