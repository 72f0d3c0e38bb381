#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medgenius/genius.hpp"
#include "medgenius/mediation_formula.hpp"

namespace medgenius::simulation {

using genius::BootCi;
using genius::Contrast;
using genius::Dataset;
using genius::Method;

enum class Dag { a, b, c, d };

std::string to_string(Dag dag);
std::string to_string(Method method);
Dag dag_from_string(const std::string& s);
Method method_from_string(const std::string& s);

struct DgpConfig {
    Dag dag = Dag::a;
    Eigen::Index n = 1000;
    std::uint64_t seed = 1;
    std::uint64_t stream_id = 0; // replicate substream
    bool sd_is_second_param = true; // |0.5 + 0.5a| read as sd; false reads it as variance
};

// One pass of the generating mechanism serves all four DAGs: every component
// draw is consumed in a fixed per-row order, with absent latents entering the
// structural equations as exact zeros. DAGs sharing a (seed, stream) therefore
// share their component draws.
Dataset generate_dataset(const DgpConfig& cfg);

struct StudyConfig {
    std::vector<Dag> dags{Dag::a, Dag::b, Dag::c, Dag::d};
    std::vector<Method> methods{Method::naive, Method::genius, Method::oracle};
    std::size_t replications = 500;
    Eigen::Index n = 1000;
    Contrast contrast{1.0, 0.0};
    std::size_t bootstrap_B = 200; // 0 disables bootstrap coverage
    std::uint64_t seed = 1;
    unsigned threads = 0; // 0 = hardware concurrency
    bool sd_is_second_param = true;
    BootCi boot_ci = BootCi::percentile;
};

void validate(const StudyConfig& cfg);

struct ReportRow {
    Dag dag = Dag::a;
    Method method = Method::naive;
    double bias = 0.0;
    double mc_variance = 0.0; // population form (divide by R), so mse = bias^2 + mc_variance exactly
    double proportion_bias_pct = 0.0;
    double mse = 0.0;
    double mean_var_estimate = 0.0;
    double coverage_delta = 0.0;
    std::optional<double> coverage_bootstrap;
    std::size_t n_failed_replicates = 0;
    std::size_t n_used = 0;
    std::vector<std::string> warnings;
};

struct SimulationReport {
    StudyConfig config;
    std::vector<ReportRow> rows; // ordered by (dag, method) as configured
};

struct ReplicateRecord {
    Dag dag;
    Method method;
    std::size_t replicate;
    double estimate = 0.0;
    double var_estimate = 0.0;
    bool hit_delta = false;
    std::optional<bool> hit_boot;
    bool failed = false;
    std::string failure;
};

ReportRow operating_characteristics(const std::vector<double>& estimates,
                                    const std::vector<double>& var_estimates,
                                    const std::vector<bool>& ci_hits_delta,
                                    const std::optional<std::vector<bool>>& ci_hits_boot,
                                    double true_value);

// Runs the full (dag, method, replicate) grid. Replicates are independent
// tasks keyed by pre-assigned substreams; aggregation happens in index order,
// so reports are identical for any thread count. Per-replicate records land in
// `dump` when provided.
SimulationReport run_study(const StudyConfig& cfg, std::vector<ReplicateRecord>* dump = nullptr);

} // namespace medgenius::simulation
