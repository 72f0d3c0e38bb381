#include "medgenius/cli_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "medgenius/version.hpp"

namespace medgenius::cli_io {

namespace cs = core_stats;
namespace mf = mediation_formula;
namespace sim = simulation;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- csv input

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any_field = false;
    std::size_t line = 1;

    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        any_field = true;
    };
    auto end_record = [&]() {
        if (!any_field && record.empty()) return; // skip blank line
        end_field();
        if (table.header.empty()) {
            table.header = record;
        } else {
            if (record.size() != table.header.size())
                throw ParseError(path + ":" + std::to_string(line) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(record.size()));
            table.rows.push_back(record);
        }
        record.clear();
        any_field = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
                if (ch == '\n') ++line;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            end_field();
            any_field = true;
        } else if (ch == '\r') {
            // swallow, \n handles the record break
        } else if (ch == '\n') {
            end_record();
            ++line;
        } else {
            field.push_back(ch);
        }
    }
    if (quoted) throw ParseError(path + ": unterminated quoted field");
    if (any_field || !field.empty()) end_record();
    if (table.header.empty()) throw ParseError(path + ": missing header row");
    return table;
}

std::size_t column_index(const CsvTable& table, const std::string& name, const std::string& path) {
    for (std::size_t j = 0; j < table.header.size(); ++j)
        if (table.header[j] == name) return j;
    throw MissingColumn(path + ": column '" + name + "' not found in header");
}

bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NULL" ||
           s == "null" || s == ".";
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(end[-1]))) --end;
    if (begin == end) return false;
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end && std::isfinite(out);
}

} // namespace

LoadResult load_csv(const std::string& path, const ColumnSpec& spec) {
    const CsvTable table = parse_csv(path);

    struct Selected {
        std::string name;
        std::size_t index;
        std::vector<double>* sink;
    };

    LoadResult result;
    std::vector<double> y, m, a;
    std::vector<std::vector<double>> covs(spec.covariates.size());
    std::vector<double> u, w, mt;

    std::vector<Selected> selected;
    const bool with_outcome = !spec.outcome.empty();
    if (with_outcome) selected.push_back({spec.outcome, column_index(table, spec.outcome, path), &y});
    selected.push_back({spec.mediator, column_index(table, spec.mediator, path), &m});
    selected.push_back({spec.exposure, column_index(table, spec.exposure, path), &a});
    for (std::size_t j = 0; j < spec.covariates.size(); ++j)
        selected.push_back({spec.covariates[j], column_index(table, spec.covariates[j], path), &covs[j]});
    if (spec.latent_u) selected.push_back({*spec.latent_u, column_index(table, *spec.latent_u, path), &u});
    if (spec.latent_w) selected.push_back({*spec.latent_w, column_index(table, *spec.latent_w, path), &w});
    if (spec.true_m) selected.push_back({*spec.true_m, column_index(table, *spec.true_m, path), &mt});

    for (const auto& row : table.rows) {
        std::vector<double> values(selected.size());
        bool complete = true;
        for (std::size_t j = 0; j < selected.size(); ++j) {
            const std::string& cell = row[selected[j].index];
            if (is_missing_token(cell) || !parse_double(cell, values[j])) {
                complete = false;
                break;
            }
        }
        if (!complete) {
            ++result.n_dropped;
            continue;
        }
        for (std::size_t j = 0; j < selected.size(); ++j) selected[j].sink->push_back(values[j]);
    }
    if (m.empty())
        throw AllRowsDropped(path + ": every row was dropped under the complete-case policy");
    if (result.n_dropped > 0)
        result.warnings.push_back(std::to_string(result.n_dropped) +
                                  " row(s) dropped (missing or non-numeric values)");

    const auto n = static_cast<Eigen::Index>(m.size());
    auto to_vec = [n](const std::vector<double>& v) {
        return Eigen::Map<const Eigen::VectorXd>(v.data(), n).eval();
    };
    result.data.y = with_outcome ? to_vec(y) : Eigen::VectorXd::Zero(n).eval();
    result.data.m = to_vec(m);
    result.data.a = to_vec(a);
    result.data.c.resize(n, static_cast<Eigen::Index>(covs.size()));
    for (std::size_t j = 0; j < covs.size(); ++j)
        result.data.c.col(static_cast<Eigen::Index>(j)) = to_vec(covs[j]);
    if (spec.latent_u) result.data.latent_u = to_vec(u);
    if (spec.latent_w) result.data.latent_w = to_vec(w);
    if (spec.true_m) result.data.true_m = to_vec(mt);
    return result;
}

mf::DiscreteMediationTable load_count_csv(const std::string& path) {
    const CsvTable table = parse_csv(path);
    const std::size_t yi = column_index(table, "y", path);
    const std::size_t mi = column_index(table, "m", path);
    const std::size_t ai = column_index(table, "a", path);
    const std::size_t ci = column_index(table, "c", path);
    const std::size_t ki = column_index(table, "count", path);

    auto level_index = [](std::vector<std::string>& levels, const std::string& label) {
        for (std::size_t j = 0; j < levels.size(); ++j)
            if (levels[j] == label) return j;
        levels.push_back(label);
        return levels.size() - 1;
    };

    mf::DiscreteMediationTable t;
    struct Entry {
        int y;
        std::size_t m, a, c;
        std::uint64_t count;
    };
    std::vector<Entry> entries;
    std::size_t line = 1;
    for (const auto& row : table.rows) {
        ++line;
        Entry e{};
        if (row[yi] == "0") e.y = 0;
        else if (row[yi] == "1") e.y = 1;
        else throw ParseError(path + ":" + std::to_string(line) + ": outcome must be 0 or 1, got '" + row[yi] + "'");
        e.m = level_index(t.m_levels, row[mi]);
        e.a = level_index(t.a_levels, row[ai]);
        e.c = level_index(t.c_levels, row[ci]);
        std::uint64_t count = 0;
        const auto res = std::from_chars(row[ki].data(), row[ki].data() + row[ki].size(), count);
        if (res.ec != std::errc() || res.ptr != row[ki].data() + row[ki].size())
            throw ParseError(path + ":" + std::to_string(line) + ": bad count '" + row[ki] + "'");
        e.count = count;
        entries.push_back(e);
    }
    t.counts.assign(2 * t.m_levels.size() * t.a_levels.size() * t.c_levels.size(), 0);
    for (const auto& e : entries) t.at(e.y, e.m, e.a, e.c) += e.count;
    mf::validate(t);
    return t;
}

namespace {

// ------------------------------------------------------------- serialization

std::string fmt_number(double v) { return json(v).dump(); }

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

std::string join_invocation(int argc, const char* const* argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out.push_back(' ');
        const std::string arg = argv[i];
        if (arg.find_first_of(" \t\"'") != std::string::npos) {
            out.push_back('"');
            for (char ch : arg) {
                if (ch == '"') out += "\\\"";
                else out.push_back(ch);
            }
            out.push_back('"');
        } else {
            out += arg;
        }
    }
    return out;
}

json artifact_block(const std::string& invocation) {
    return json{{"name", "medgenius"}, {"version", MEDGENIUS_VERSION}, {"invocation", invocation}};
}

void flatten_json(const json& node, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (node.is_object()) {
        for (const auto& [key, value] : node.items())
            flatten_json(value, prefix.empty() ? key : prefix + "." + key, out);
    } else if (node.is_array()) {
        std::size_t i = 0;
        for (const auto& value : node)
            flatten_json(value, prefix + "[" + std::to_string(i++) + "]", out);
    } else {
        out.emplace_back(prefix, node.is_string() ? node.get<std::string>() : node.dump());
    }
}

std::string report_to_csv(const json& report) {
    std::vector<std::pair<std::string, std::string>> pairs;
    flatten_json(report, "", pairs);
    std::string out = "key,value\n";
    for (const auto& [key, value] : pairs)
        out += quote_csv(key) + "," + quote_csv(value) + "\n";
    return out;
}

void emit(const std::string& text, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
        std::ofstream out(output_path, std::ios::binary);
        if (!out) throw InvalidParameter("cannot write '" + output_path + "'");
        out << text;
    }
}

json het_to_json(const genius::HetTestResult& het) {
    json block{{"statistic", het.statistic}, {"df", het.df}, {"p_value", het.p_value}};
    if (!het.variance_by_level.empty()) {
        json levels = json::object();
        for (const auto& [level, variance] : het.variance_by_level)
            levels[fmt_number(level)] = variance;
        block["variance_by_level"] = levels;
    }
    return block;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string input;
    ColumnSpec columns;
    std::string covariates_joined;
    std::string method = "genius";
    double a = 1.0;
    double a_star = 0.0;
    std::size_t bootstrap_B = 0;
    std::uint64_t boot_seed = 1;
    std::string boot_ci = "percentile";
    std::string format = "json";
    std::string output;
    std::string robust = "hc0";
    bool first_stage_interaction = false;
};

std::vector<std::string> split_csv_list(const std::string& joined) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(joined);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_estimate(const EstimateArgs& args, const std::string& invocation) {
    const auto method = sim::method_from_string(args.method);
    if (args.bootstrap_B != 0 && args.bootstrap_B < 100)
        throw InvalidParameter("--bootstrap needs B >= 100 (or 0 to disable)");

    ColumnSpec spec = args.columns;
    spec.covariates = split_csv_list(args.covariates_joined);
    LoadResult loaded = load_csv(args.input, spec);
    genius::validate(loaded.data);

    genius::Inference inference;
    inference.bootstrap = args.bootstrap_B > 0;
    inference.B = args.bootstrap_B;
    inference.seed = args.boot_seed;
    inference.boot_ci = args.boot_ci == "normal" ? genius::BootCi::normal : genius::BootCi::percentile;

    genius::GeniusOptions opt;
    opt.first_stage_ax_interaction = args.first_stage_interaction;
    opt.robust = args.robust == "hc1" ? cs::RobustVariant::hc1 : cs::RobustVariant::hc0;

    std::vector<std::string> warnings = loaded.warnings;
    bool weak = false;
    genius::NieEstimate est;
    try {
        switch (method) {
            case genius::Method::naive:
                est = mf::nie_naive(loaded.data, args.a, args.a_star, inference);
                break;
            case genius::Method::oracle:
                est = mf::nie_oracle(loaded.data, args.a, args.a_star, inference);
                break;
            case genius::Method::genius:
                est = genius::nie_genius(loaded.data, args.a, args.a_star, inference, opt);
                break;
            case genius::Method::genius_interaction:
                est = genius::nie_interaction(loaded.data, args.a, args.a_star, inference, opt);
                break;
        }
    } catch (const genius::WeakIdentification& e) {
        // still report the flagged fit, just through the weak-id exit code
        weak = true;
        warnings.push_back(e.what());
        est.method = method;
        est.contrast = {args.a, args.a_star};
        est.fit = e.fit;
        est.theta_m = e.fit.theta_m;
        est.theta_mc = e.fit.theta_mc;
        try {
            const auto [beta, se_beta] = genius::beta_a_fit(loaded.data, opt.robust);
            est.beta_a = beta;
            est.nie = est.theta_m * beta * (args.a - args.a_star);
            est.se_delta = std::sqrt(genius::delta_var(est.theta_m, e.fit.se_theta, beta, se_beta,
                                                       args.a - args.a_star));
            est.ci_delta = {est.nie - 1.96 * est.se_delta, est.nie + 1.96 * est.se_delta};
        } catch (const Error&) {
            // leave the point estimate fields at their defaults
        }
    }

    json report;
    report["artifact"] = artifact_block(invocation);
    report["command"] = "estimate";
    report["input"] = json{{"path", args.input},
                           {"n", static_cast<std::int64_t>(loaded.data.n())},
                           {"n_rows_dropped", static_cast<std::int64_t>(loaded.n_dropped)}};
    report["method"] = sim::to_string(method);
    report["contrast"] = json{{"a", args.a}, {"a_star", args.a_star}};
    report["nie"] = est.nie;
    json components{{"theta_m", est.theta_m}, {"beta_a", est.beta_a}};
    if (est.theta_mc) components["theta_mc"] = vector_to_json(*est.theta_mc);
    if (est.beta_ac) components["beta_ac"] = vector_to_json(*est.beta_ac);
    report["components"] = components;
    report["se_delta"] = est.se_delta;
    report["ci_delta"] = json{{"lo", est.ci_delta.first}, {"hi", est.ci_delta.second}};
    if (inference.bootstrap && est.se_bootstrap) {
        report["bootstrap"] = json{{"B", static_cast<std::int64_t>(inference.B)},
                                   {"seed", inference.seed},
                                   {"ci_kind", args.boot_ci},
                                   {"se", *est.se_bootstrap},
                                   {"ci", json{{"lo", est.ci_bootstrap->first},
                                               {"hi", est.ci_bootstrap->second}}},
                                   {"failures", static_cast<std::int64_t>(est.bootstrap_failures)}};
    } else {
        report["bootstrap"] = nullptr;
    }
    if (est.fit && est.fit->het_test) {
        report["het_test"] = het_to_json(*est.fit->het_test);
    } else {
        try {
            report["het_test"] = het_to_json(genius::het_variance_test(loaded.data));
        } catch (const Error&) {
            report["het_test"] = nullptr;
        }
    }
    report["weak_id"] = weak || (est.fit && est.fit->weak_id);
    report["n"] = static_cast<std::int64_t>(loaded.data.n());
    report["warnings"] = warnings;

    emit(args.format == "csv" ? report_to_csv(report) : report.dump(2) + "\n", args.output);
    return weak ? exit_weak_id : exit_ok;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string config_path;
    std::string dags_joined;
    std::string methods_joined;
    std::int64_t replications = -1;
    std::int64_t n = -1;
    std::int64_t bootstrap_B = -1;
    std::int64_t seed = -1;
    std::int64_t threads = -1;
    double a = 1.0;
    double a_star = 0.0;
    bool a_set = false;
    bool a_star_set = false;
    bool variance_second_param = false;
    std::string boot_ci;
    std::string format = "json";
    std::string output;
    std::string dump_path;
};

sim::StudyConfig resolve_study_config(const SimulateArgs& args) {
    sim::StudyConfig cfg;
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw ParseError("cannot open config '" + args.config_path + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("config '" + args.config_path + "': " + e.what());
        }
        if (doc.contains("dags")) {
            cfg.dags.clear();
            for (const auto& s : doc["dags"]) cfg.dags.push_back(sim::dag_from_string(s.get<std::string>()));
        }
        if (doc.contains("methods")) {
            cfg.methods.clear();
            for (const auto& s : doc["methods"])
                cfg.methods.push_back(sim::method_from_string(s.get<std::string>()));
        }
        if (doc.contains("replications")) cfg.replications = doc["replications"].get<std::size_t>();
        if (doc.contains("n")) cfg.n = doc["n"].get<Eigen::Index>();
        if (doc.contains("bootstrap_B")) cfg.bootstrap_B = doc["bootstrap_B"].get<std::size_t>();
        if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
        if (doc.contains("threads")) cfg.threads = doc["threads"].get<unsigned>();
        if (doc.contains("sd_is_second_param")) cfg.sd_is_second_param = doc["sd_is_second_param"].get<bool>();
        if (doc.contains("boot_ci"))
            cfg.boot_ci = doc["boot_ci"].get<std::string>() == "normal" ? genius::BootCi::normal
                                                                        : genius::BootCi::percentile;
        if (doc.contains("contrast")) {
            cfg.contrast.a = doc["contrast"].value("a", 1.0);
            cfg.contrast.a_star = doc["contrast"].value("a_star", 0.0);
        }
    }
    if (!args.dags_joined.empty()) {
        cfg.dags.clear();
        for (const auto& s : split_csv_list(args.dags_joined)) cfg.dags.push_back(sim::dag_from_string(s));
    }
    if (!args.methods_joined.empty()) {
        cfg.methods.clear();
        for (const auto& s : split_csv_list(args.methods_joined))
            cfg.methods.push_back(sim::method_from_string(s));
    }
    if (args.replications >= 0) cfg.replications = static_cast<std::size_t>(args.replications);
    if (args.n >= 0) cfg.n = args.n;
    if (args.bootstrap_B >= 0) cfg.bootstrap_B = static_cast<std::size_t>(args.bootstrap_B);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    if (args.threads >= 0) {
        cfg.threads = static_cast<unsigned>(args.threads);
    } else if (const char* env = std::getenv("MEDGENIUS_THREADS")) {
        cfg.threads = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
    if (args.a_set) cfg.contrast.a = args.a;
    if (args.a_star_set) cfg.contrast.a_star = args.a_star;
    if (args.variance_second_param) cfg.sd_is_second_param = false;
    if (!args.boot_ci.empty())
        cfg.boot_ci = args.boot_ci == "normal" ? genius::BootCi::normal : genius::BootCi::percentile;
    return cfg;
}

json study_config_to_json(const sim::StudyConfig& cfg) {
    json dags = json::array(), methods = json::array();
    for (auto d : cfg.dags) dags.push_back(sim::to_string(d));
    for (auto m : cfg.methods) methods.push_back(sim::to_string(m));
    return json{{"dags", dags},
                {"methods", methods},
                {"replications", static_cast<std::int64_t>(cfg.replications)},
                {"n", static_cast<std::int64_t>(cfg.n)},
                {"contrast", json{{"a", cfg.contrast.a}, {"a_star", cfg.contrast.a_star}}},
                {"bootstrap_B", static_cast<std::int64_t>(cfg.bootstrap_B)},
                {"boot_ci", cfg.boot_ci == genius::BootCi::normal ? "normal" : "percentile"},
                {"seed", cfg.seed},
                {"threads", cfg.threads},
                {"sd_is_second_param", cfg.sd_is_second_param}};
}

json report_row_to_json(const sim::ReportRow& row) {
    json r{{"dag", sim::to_string(row.dag)},
           {"method", sim::to_string(row.method)},
           {"bias", row.bias},
           {"mc_variance", row.mc_variance},
           {"proportion_bias_pct", row.proportion_bias_pct},
           {"mse", row.mse},
           {"mean_var_estimate", row.mean_var_estimate},
           {"coverage_delta", row.coverage_delta}};
    if (row.coverage_bootstrap) r["coverage_bootstrap"] = *row.coverage_bootstrap;
    else r["coverage_bootstrap"] = nullptr;
    r["n_failed_replicates"] = static_cast<std::int64_t>(row.n_failed_replicates);
    r["n_used"] = static_cast<std::int64_t>(row.n_used);
    r["warnings"] = row.warnings;
    return r;
}

std::string simulate_report_csv(const sim::SimulationReport& report, const std::string& invocation) {
    std::string out;
    out += "# medgenius " MEDGENIUS_VERSION "\n";
    out += "# invocation: " + invocation + "\n";
    out += "# seed: " + std::to_string(report.config.seed) + "\n";
    out += "dag,method,bias,mc_variance,proportion_bias_pct,mse,mean_var_estimate,coverage_delta,"
           "coverage_bootstrap,n_failed_replicates,n_used\n";
    for (const auto& row : report.rows) {
        out += sim::to_string(row.dag) + "," + sim::to_string(row.method) + "," +
               fmt_number(row.bias) + "," + fmt_number(row.mc_variance) + "," +
               fmt_number(row.proportion_bias_pct) + "," + fmt_number(row.mse) + "," +
               fmt_number(row.mean_var_estimate) + "," + fmt_number(row.coverage_delta) + ",";
        out += row.coverage_bootstrap ? fmt_number(*row.coverage_bootstrap) : std::string();
        out += "," + std::to_string(row.n_failed_replicates) + "," + std::to_string(row.n_used) + "\n";
    }
    return out;
}

std::string dump_to_csv(const std::vector<sim::ReplicateRecord>& records) {
    std::string out = "dag,method,replicate,estimate,var_estimate,hit_delta,hit_boot,failed,failure\n";
    for (const auto& rec : records) {
        out += sim::to_string(rec.dag) + "," + sim::to_string(rec.method) + "," +
               std::to_string(rec.replicate) + ",";
        if (rec.failed) {
            out += ",,,,1," + quote_csv(rec.failure) + "\n";
        } else {
            out += fmt_number(rec.estimate) + "," + fmt_number(rec.var_estimate) + "," +
                   (rec.hit_delta ? "1" : "0") + ",";
            out += rec.hit_boot ? (*rec.hit_boot ? "1" : "0") : "";
            out += ",0,\n";
        }
    }
    return out;
}

int cmd_simulate(const SimulateArgs& args, const std::string& invocation) {
    const sim::StudyConfig cfg = resolve_study_config(args);
    sim::validate(cfg);

    std::vector<sim::ReplicateRecord> dump;
    sim::SimulationReport report =
        sim::run_study(cfg, args.dump_path.empty() ? nullptr : &dump);

    if (!args.dump_path.empty()) emit(dump_to_csv(dump), args.dump_path);

    if (args.format == "csv") {
        emit(simulate_report_csv(report, invocation), args.output);
    } else {
        json doc;
        doc["artifact"] = artifact_block(invocation);
        doc["command"] = "simulate";
        doc["config"] = study_config_to_json(cfg);
        json rows = json::array();
        for (const auto& row : report.rows) rows.push_back(report_row_to_json(row));
        doc["rows"] = rows;
        emit(doc.dump(2) + "\n", args.output);
    }
    return exit_ok;
}

// ---------------------------------------------------------------- het-test

struct HetArgs {
    std::string input;
    std::string mediator;
    std::string exposure;
    std::string covariates_joined;
    std::string format = "json";
    std::string output;
};

int cmd_het_test(const HetArgs& args, const std::string& invocation) {
    ColumnSpec spec;
    spec.mediator = args.mediator;
    spec.exposure = args.exposure;
    spec.covariates = split_csv_list(args.covariates_joined);
    LoadResult loaded = load_csv(args.input, spec);

    const genius::HetTestResult het = genius::het_variance_test(loaded.data);

    json report;
    report["artifact"] = artifact_block(invocation);
    report["command"] = "het-test";
    report["input"] = json{{"path", args.input},
                           {"n", static_cast<std::int64_t>(loaded.data.n())},
                           {"n_rows_dropped", static_cast<std::int64_t>(loaded.n_dropped)}};
    report["het_test"] = het_to_json(het);
    std::vector<std::string> warnings = loaded.warnings;
    if (loaded.data.n() < 10)
        warnings.push_back("fewer than 10 rows: the chi-square reference has no asymptotic footing");
    report["warnings"] = warnings;

    emit(args.format == "csv" ? report_to_csv(report) : report.dump(2) + "\n", args.output);
    return exit_ok;
}

// ---------------------------------------------------------------- rr-nie

struct RrArgs {
    std::string input;
    std::string a;
    std::string a_star;
    std::string c;
    std::string format = "json";
    std::string output;
};

int cmd_rr_nie(const RrArgs& args, const std::string& invocation) {
    const mf::DiscreteMediationTable table = load_count_csv(args.input);
    const mf::RrNieEstimate est = mf::rr_nie_plugin(table, args.a, args.a_star, args.c);

    json report;
    report["artifact"] = artifact_block(invocation);
    report["command"] = "rr-nie";
    report["input"] = json{{"path", args.input}};
    report["contrast"] = json{{"a", est.contrast.first}, {"a_star", est.contrast.second}};
    report["c_level"] = est.c_level;
    report["rr"] = est.rr;
    report["numerator"] = est.numerator;
    report["denominator"] = est.denominator;
    report["warnings"] = json::array();

    emit(args.format == "csv" ? report_to_csv(report) : report.dump(2) + "\n", args.output);
    return exit_ok;
}

} // namespace

int run(int argc, const char* const* argv) {
    const std::string invocation = join_invocation(argc, argv);

    CLI::App app{"natural indirect effect estimation, identification diagnostics and simulation"};
    app.set_version_flag("--version", std::string("medgenius ") + MEDGENIUS_VERSION);
    app.require_subcommand(1);

    EstimateArgs est_args;
    auto* est = app.add_subcommand("estimate", "estimate the NIE from a CSV dataset");
    est->add_option("--input", est_args.input, "input CSV path")->required();
    est->add_option("--outcome", est_args.columns.outcome, "outcome column")->required();
    est->add_option("--mediator", est_args.columns.mediator, "mediator column")->required();
    est->add_option("--exposure", est_args.columns.exposure, "exposure column")->required();
    est->add_option("--covariates", est_args.covariates_joined, "comma-separated covariate columns");
    std::string lu, lw, tm;
    est->add_option("--latent-u", lu, "mediator-outcome confounder column (oracle)");
    est->add_option("--latent-w", lw, "exposure-outcome confounder column (oracle)");
    est->add_option("--true-m", tm, "error-free mediator column (oracle)");
    est->add_option("--method", est_args.method, "naive | genius | genius-interaction | oracle")
        ->check(CLI::IsMember({"naive", "genius", "genius-interaction", "oracle"}));
    est->add_option("--a", est_args.a, "exposure contrast level (default 1)");
    est->add_option("--a-star", est_args.a_star, "reference contrast level (default 0)");
    est->add_option("--bootstrap", est_args.bootstrap_B, "bootstrap resamples (0 disables)");
    est->add_option("--boot-seed", est_args.boot_seed, "bootstrap seed");
    est->add_option("--boot-ci", est_args.boot_ci, "percentile | normal")
        ->check(CLI::IsMember({"percentile", "normal"}));
    est->add_option("--format", est_args.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    est->add_option("--output", est_args.output, "write the report here instead of stdout");
    est->add_option("--robust", est_args.robust, "hc0 | hc1")->check(CLI::IsMember({"hc0", "hc1"}));
    est->add_flag("--first-stage-interaction", est_args.first_stage_interaction,
                  "include exposure x covariate terms in the mediator first stage");

    SimulateArgs sim_args;
    auto* simc = app.add_subcommand("simulate", "Monte Carlo operating characteristics");
    simc->add_option("--config", sim_args.config_path, "JSON study config");
    simc->add_option("--dags", sim_args.dags_joined, "comma-separated subset of a,b,c,d");
    simc->add_option("--methods", sim_args.methods_joined, "comma-separated subset of naive,genius,oracle");
    simc->add_option("--replications", sim_args.replications, "Monte Carlo replications");
    simc->add_option("--n", sim_args.n, "sample size per replication");
    simc->add_option("--bootstrap", sim_args.bootstrap_B, "bootstrap resamples per replicate (0 disables)");
    simc->add_option("--seed", sim_args.seed, "study seed");
    simc->add_option("--threads", sim_args.threads, "worker threads (0 = hardware)");
    auto* a_opt = simc->add_option("--a", sim_args.a, "exposure contrast level");
    auto* as_opt = simc->add_option("--a-star", sim_args.a_star, "reference contrast level");
    simc->add_flag("--variance-second-param", sim_args.variance_second_param,
                   "read |0.5+0.5a| as a variance instead of an sd");
    simc->add_option("--boot-ci", sim_args.boot_ci, "percentile | normal")
        ->check(CLI::IsMember({"percentile", "normal", ""}));
    simc->add_option("--format", sim_args.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    simc->add_option("--output", sim_args.output, "write the report here instead of stdout");
    simc->add_option("--dump-estimates", sim_args.dump_path, "write per-replicate estimates CSV here");

    HetArgs het_args;
    auto* het = app.add_subcommand("het-test", "exposure-driven mediator heteroskedasticity test");
    het->add_option("--input", het_args.input, "input CSV path")->required();
    het->add_option("--mediator", het_args.mediator, "mediator column")->required();
    het->add_option("--exposure", het_args.exposure, "exposure column")->required();
    het->add_option("--covariates", het_args.covariates_joined, "comma-separated covariate columns");
    het->add_option("--format", het_args.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    het->add_option("--output", het_args.output, "write the report here instead of stdout");

    RrArgs rr_args;
    auto* rr = app.add_subcommand("rr-nie", "discrete risk-ratio NIE plug-in from a count table");
    rr->add_option("--input", rr_args.input, "long-format (y,m,a,c,count) CSV path")->required();
    rr->add_option("--a", rr_args.a, "exposure level label")->required();
    rr->add_option("--a-star", rr_args.a_star, "reference level label")->required();
    rr->add_option("--c", rr_args.c, "conditioning covariate level label")->required();
    rr->add_option("--format", rr_args.format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    rr->add_option("--output", rr_args.output, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    try {
        if (est->parsed()) {
            if (!lu.empty()) est_args.columns.latent_u = lu;
            if (!lw.empty()) est_args.columns.latent_w = lw;
            if (!tm.empty()) est_args.columns.true_m = tm;
            return cmd_estimate(est_args, invocation);
        }
        if (simc->parsed()) {
            sim_args.a_set = a_opt->count() > 0;
            sim_args.a_star_set = as_opt->count() > 0;
            return cmd_simulate(sim_args, invocation);
        }
        if (het->parsed()) return cmd_het_test(het_args, invocation);
        if (rr->parsed()) return cmd_rr_nie(rr_args, invocation);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    }
    return exit_validation;
}

} // namespace medgenius::cli_io
