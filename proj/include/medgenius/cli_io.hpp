#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "medgenius/genius.hpp"
#include "medgenius/mediation_formula.hpp"
#include "medgenius/simulation.hpp"

namespace medgenius::cli_io {

struct ColumnSpec {
    std::string outcome;
    std::string mediator;
    std::string exposure;
    std::vector<std::string> covariates;
    std::optional<std::string> latent_u;
    std::optional<std::string> latent_w;
    std::optional<std::string> true_m;
};

struct LoadResult {
    genius::Dataset data;
    std::size_t n_dropped = 0;
    std::vector<std::string> warnings;
};

// RFC-4180-style CSV with a header row. Rows with a missing or non-numeric
// value in any selected column are dropped (complete-case) and counted.
LoadResult load_csv(const std::string& path, const ColumnSpec& spec);

// Long-format (y, m, a, c, count) table for the discrete risk-ratio plug-in.
mediation_formula::DiscreteMediationTable load_count_csv(const std::string& path);

// Exit codes: 0 success, 2 validation error, 3 weak identification (report
// still written with weak_id flagged).
inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_weak_id = 3;

int run(int argc, const char* const* argv);

} // namespace medgenius::cli_io
