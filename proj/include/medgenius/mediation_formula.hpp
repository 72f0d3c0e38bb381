#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medgenius/genius.hpp"

namespace medgenius::mediation_formula {

using genius::Dataset;
using genius::Inference;
using genius::NieEstimate;

// Product-of-coefficients NIE from Y ~ 1 + M + A + C and M ~ 1 + A + C.
NieEstimate nie_naive(const Dataset& d, double a, double a_star, const Inference& inference = {});

// Same product estimator, but the outcome design appends the latent columns
// (order 1, M_true, A, U, W, C) and the error-free mediator replaces M.
NieEstimate nie_oracle(const Dataset& d, double a, double a_star, const Inference& inference = {});

// Counts indexed by (y in {0,1}, m level, a level, c level); levels carry
// their CSV labels.
struct DiscreteMediationTable {
    std::vector<std::string> m_levels;
    std::vector<std::string> a_levels;
    std::vector<std::string> c_levels;
    std::vector<std::uint64_t> counts; // dense, y fastest: index(y,m,a,c)

    std::size_t index(int y, std::size_t mi, std::size_t ai, std::size_t ci) const;
    std::uint64_t& at(int y, std::size_t mi, std::size_t ai, std::size_t ci);
    std::uint64_t at(int y, std::size_t mi, std::size_t ai, std::size_t ci) const;
    std::size_t level_of(const std::vector<std::string>& levels, const std::string& label) const;
};

void validate(const DiscreteMediationTable& t);

struct RrNieEstimate {
    double rr = 1.0;
    std::pair<std::string, std::string> contrast; // (a, a_star) labels
    std::string c_level;
    double numerator = 0.0;
    double denominator = 0.0;
};

// Risk-ratio NIE plug-in with empirical frequencies:
//   sum_m Pr(Y=1|m,a,c) f(m|a,c)  /  sum_m Pr(Y=1|m,a,c) f(m|a*,c)
RrNieEstimate rr_nie_plugin(const DiscreteMediationTable& t, const std::string& a,
                            const std::string& a_star, const std::string& c);

} // namespace medgenius::mediation_formula
