#pragma once

#include "zib/model.hpp"
#include "zib/optimizer.hpp"
#include "zib/penalty.hpp"
#include "zib/selection.hpp"
#include "zib/simulation.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

/// \file io.hpp
///
/// CSV ingestion, model artifacts and report serialization.

namespace zib {

#ifndef ZIB_VERSION
#define ZIB_VERSION "0.0.0"
#endif

inline constexpr const char* tool_version = ZIB_VERSION;
inline constexpr int artifact_schema_version = 1;
inline constexpr const char* intercept_name = "(intercept)";

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// ================================ CSV ====================================

namespace csv {
    /// Splits RFC-4180 text into records. Quoted fields may contain commas,
    /// doubled quotes and line breaks; CRLF and LF line endings are accepted.
    inline auto parse(const std::string& text) -> std::vector<std::vector<std::string>>
    {
        std::vector<std::vector<std::string>> records;
        std::vector<std::string> record;
        std::string field;
        bool quoted = false;
        bool field_started = false;
        std::size_t i = 0;
        if (text.starts_with("\xEF\xBB\xBF")) { i = 3; }
        auto end_record = [&] {
            record.push_back(std::move(field));
            field.clear();
            if (!(record.size() == 1 && record[0].empty())) { records.push_back(std::move(record)); }
            record.clear();
            field_started = false;
        };
        for (; i < text.size(); ++i) {
            auto const c = text[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field.push_back('"');
                        ++i;
                    }
                    else {
                        quoted = false;
                    }
                }
                else {
                    field.push_back(c);
                }
                continue;
            }
            switch (c) {
                case '"':
                    if (!field_started) {
                        quoted = true;
                        field_started = true;
                    }
                    else {
                        field.push_back(c);
                    }
                    break;
                case ',':
                    record.push_back(std::move(field));
                    field.clear();
                    field_started = false;
                    break;
                case '\r':
                    if (i + 1 < text.size() && text[i + 1] == '\n') { ++i; }
                    end_record();
                    break;
                case '\n': end_record(); break;
                default:
                    field.push_back(c);
                    field_started = true;
            }
        }
        if (quoted) { throw io_error{"csv: unterminated quoted field"}; }
        if (field_started || !field.empty() || !record.empty()) { end_record(); }
        return records;
    }

    inline auto quote(const std::string& s) -> std::string
    {
        if (s.find_first_of(",\"\r\n") == std::string::npos) { return s; }
        std::string out = "\"";
        for (auto c : s) {
            if (c == '"') { out += '"'; }
            out += c;
        }
        return out + "\"";
    }

    inline auto parse_number(std::string_view cell, double& out) -> bool
    {
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) { cell.remove_prefix(1); }
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) { cell.remove_suffix(1); }
        if (!cell.empty() && cell.front() == '+') { cell.remove_prefix(1); }
        if (cell.empty()) { return false; }
        auto const [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
        return ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(out);
    }
} // namespace csv

/// Shortest text that reads back as the same double (at most 17 significant digits).
inline auto format_double(double v) -> std::string
{
    char buf[64];
    auto const [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string{"nan"};
}

inline auto read_text_file(const std::filesystem::path& path) -> std::string
{
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw io_error{"cannot open '" + path.string() + "' for reading"}; }
    return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

/// Writes to a sibling temporary file and renames it over the target, so a
/// failed write never leaves a partial file at `path`.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) { throw io_error{"cannot open '" + tmp.string() + "' for writing"}; }
        out << content;
        out.flush();
        if (!out) {
            out.close();
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw io_error{"failed writing '" + tmp.string() + "'"};
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw io_error{"cannot move output into place at '" + path.string() + "': " + ec.message()};
    }
}

/// Which CSV columns play which role.
struct ColumnRoles {
    std::string response;
    std::vector<std::string> x_columns;
    std::vector<std::string> z_columns;
    bool add_intercept_x = false;
    bool add_intercept_z = false;
};

struct LoadedDataset {
    Dataset data;
    std::vector<std::string> x_names; ///< includes the intercept name when inserted
    std::vector<std::string> z_names;
};

namespace detail {
    struct CsvTable {
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;

        [[nodiscard]] auto column(const std::string& name) const -> std::size_t
        {
            for (std::size_t j = 0; j < header.size(); ++j) {
                if (header[j] == name) { return j; }
            }
            throw validation_error{"column \"" + name + "\" not found in input header"};
        }

        /// 1-based data row numbering (the header is not counted).
        [[nodiscard]] auto number(std::size_t row, std::size_t col) const -> double
        {
            double v = 0.0;
            auto const& cells = rows[row];
            if (col >= cells.size() || !csv::parse_number(cells[col], v)) {
                std::string cell = col < cells.size() ? cells[col] : std::string{};
                throw validation_error{"row " + std::to_string(row + 1) + ", column \"" +
                                       header[col] + "\": value \"" + cell +
                                       "\" is missing or not a finite number"};
            }
            return v;
        }
    };

    inline auto read_table(const std::filesystem::path& path) -> CsvTable
    {
        auto records = csv::parse(read_text_file(path));
        if (records.empty()) { throw validation_error{"input '" + path.string() + "' is empty"}; }
        CsvTable table;
        table.header = std::move(records.front());
        table.rows.assign(std::make_move_iterator(records.begin() + 1),
                          std::make_move_iterator(records.end()));
        if (table.rows.empty()) {
            throw validation_error{"input '" + path.string() + "' has a header but no data rows"};
        }
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            if (table.rows[r].size() != table.header.size()) {
                throw validation_error{"row " + std::to_string(r + 1) + " has " +
                                       std::to_string(table.rows[r].size()) + " fields, header has " +
                                       std::to_string(table.header.size())};
            }
        }
        return table;
    }

    inline auto design(const CsvTable& table, const std::vector<std::string>& columns,
                       bool add_intercept, std::vector<std::string>& names) -> Matrix
    {
        std::vector<std::size_t> idx;
        for (auto const& c : columns) { idx.push_back(table.column(c)); }
        names.clear();
        if (add_intercept) { names.emplace_back(intercept_name); }
        names.insert(names.end(), columns.begin(), columns.end());
        auto const n = static_cast<Eigen::Index>(table.rows.size());
        auto const offset = add_intercept ? 1 : 0;
        Matrix m(n, static_cast<Eigen::Index>(idx.size()) + offset);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (add_intercept) { m(i, 0) = 1.0; }
            for (std::size_t j = 0; j < idx.size(); ++j) {
                m(i, static_cast<Eigen::Index>(j) + offset) =
                    table.number(static_cast<std::size_t>(i), idx[j]);
            }
        }
        return m;
    }
} // namespace detail

/// Builds (y, X, Z) from a CSV file with a header row, then validates it.
inline auto load_csv(const std::filesystem::path& path, const ColumnRoles& roles) -> LoadedDataset
{
    if (roles.response.empty()) { throw validation_error{"no response column given"}; }
    if (roles.x_columns.empty() && !roles.add_intercept_x) {
        throw validation_error{"no X columns given"};
    }
    if (roles.z_columns.empty() && !roles.add_intercept_z) {
        throw validation_error{"no Z columns given"};
    }
    for (auto const* list : {&roles.x_columns, &roles.z_columns}) {
        for (auto const& c : *list) {
            if (c == roles.response) {
                throw validation_error{"response column \"" + c + "\" cannot also be a covariate"};
            }
        }
    }
    auto const table = detail::read_table(path);
    LoadedDataset out;
    auto const ycol = table.column(roles.response);
    out.data.y.resize(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out.data.y[static_cast<Eigen::Index>(r)] = table.number(r, ycol);
    }
    out.data.X = detail::design(table, roles.x_columns, roles.add_intercept_x, out.x_names);
    out.data.Z = detail::design(table, roles.z_columns, roles.add_intercept_z, out.z_names);
    out.data = validate_dataset(std::move(out.data));
    return out;
}

// ============================ Model artifact =============================

struct ModelArtifact {
    int schema_version = artifact_schema_version;
    std::string tool_version = zib::tool_version;
    std::uint64_t seed = 0;
    PenaltySpec spec;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    Parameters theta;
    std::vector<std::optional<double>> standard_errors;
    double level = 0.95;
    std::vector<std::optional<Interval>> intervals;
    bool se_singular = false;
    Eigen::Index n_obs = 0;
    Eigen::Index df = 0;
    double log_likelihood = 0.0;
    double penalty = 0.0;
    double objective = 0.0;
    double bic = 0.0;
    double aic = 0.0;
    bool converged = false;
    std::string status;
    std::size_t iterations = 0;
    double residual = 0.0;

    friend auto operator==(const ModelArtifact& a, const ModelArtifact& b) -> bool
    {
        auto same_intervals = [](auto const& u, auto const& v) {
            if (u.size() != v.size()) { return false; }
            for (std::size_t i = 0; i < u.size(); ++i) {
                if (u[i].has_value() != v[i].has_value()) { return false; }
                if (u[i] && (u[i]->lower != v[i]->lower || u[i]->upper != v[i]->upper)) { return false; }
            }
            return true;
        };
        return a.schema_version == b.schema_version && a.tool_version == b.tool_version &&
               a.seed == b.seed && a.spec == b.spec && a.x_names == b.x_names &&
               a.z_names == b.z_names && a.theta == b.theta &&
               a.standard_errors == b.standard_errors && a.level == b.level &&
               same_intervals(a.intervals, b.intervals) && a.se_singular == b.se_singular &&
               a.n_obs == b.n_obs && a.df == b.df && a.log_likelihood == b.log_likelihood &&
               a.penalty == b.penalty && a.objective == b.objective && a.bic == b.bic &&
               a.aic == b.aic && a.converged == b.converged && a.status == b.status &&
               a.iterations == b.iterations && a.residual == b.residual;
    }
};

inline auto make_artifact(const FitResult& result, const LoadedDataset& loaded, double level,
                          std::uint64_t seed) -> ModelArtifact
{
    ModelArtifact a;
    a.seed = seed;
    a.spec = result.spec;
    a.x_names = loaded.x_names;
    a.z_names = loaded.z_names;
    a.theta = result.theta_hat;
    auto const se = standard_errors(result);
    a.standard_errors = se.values;
    a.se_singular = se.singular;
    a.level = level;
    a.intervals = wald_intervals(result.theta_hat.flat(), se, level);
    a.n_obs = result.n_obs;
    a.df = result.degrees_of_freedom();
    a.log_likelihood = result.log_likelihood_at_solution;
    a.penalty = result.penalty_at_solution;
    a.objective = result.final_objective;
    a.bic = bic(result, result.n_obs);
    a.aic = aic(result);
    a.converged = result.converged;
    a.status = to_string(result.status);
    a.iterations = result.iterations;
    a.residual = result.residual;
    return a;
}

using ordered_json = nlohmann::ordered_json;

namespace detail {
    inline auto optional_json(const std::optional<double>& v) -> ordered_json
    {
        return v ? ordered_json(*v) : ordered_json(nullptr);
    }

    inline auto spec_json(const PenaltySpec& spec) -> ordered_json
    {
        ordered_json j;
        j["family"] = to_string(spec.family);
        j["lambda_beta"] = spec.lambda_beta;
        j["lambda_gamma"] = spec.lambda_gamma;
        j["alpha"] = spec.alpha;
        j["penalize_intercepts"] = spec.penalize_intercepts;
        j["scale_by_n"] = spec.scale_by_n;
        return j;
    }

    inline auto spec_from_json(const ordered_json& j) -> PenaltySpec
    {
        PenaltySpec spec;
        spec.family = parse_penalty_family(j.at("family").get<std::string>());
        spec.lambda_beta = j.at("lambda_beta").get<double>();
        spec.lambda_gamma = j.at("lambda_gamma").get<double>();
        spec.alpha = j.at("alpha").get<double>();
        spec.penalize_intercepts = j.at("penalize_intercepts").get<bool>();
        spec.scale_by_n = j.at("scale_by_n").get<bool>();
        return spec;
    }

    inline auto optional_from_json(const ordered_json& j) -> std::optional<double>
    {
        if (j.is_null()) { return std::nullopt; }
        return j.get<double>();
    }
} // namespace detail

inline auto to_json(const ModelArtifact& a) -> ordered_json
{
    ordered_json j;
    j["schema_version"] = a.schema_version;
    j["tool_version"] = a.tool_version;
    j["seed"] = a.seed;
    j["spec"] = detail::spec_json(a.spec);
    j["x_names"] = a.x_names;
    j["z_names"] = a.z_names;
    auto coefficients = ordered_json::array();
    auto const flat = a.theta.flat();
    auto const p = static_cast<std::size_t>(a.theta.beta.size());
    for (std::size_t k = 0; k < static_cast<std::size_t>(flat.size()); ++k) {
        ordered_json c;
        c["block"] = k < p ? "beta" : "gamma";
        c["name"] = k < p ? a.x_names.at(k) : a.z_names.at(k - p);
        c["estimate"] = flat[static_cast<Eigen::Index>(k)];
        c["se"] = detail::optional_json(k < a.standard_errors.size() ? a.standard_errors[k]
                                                                      : std::nullopt);
        auto const& ci = k < a.intervals.size() ? a.intervals[k] : std::nullopt;
        c["lower"] = ci ? ordered_json(ci->lower) : ordered_json(nullptr);
        c["upper"] = ci ? ordered_json(ci->upper) : ordered_json(nullptr);
        coefficients.push_back(std::move(c));
    }
    j["coefficients"] = std::move(coefficients);
    j["level"] = a.level;
    j["se_singular"] = a.se_singular;
    j["n_obs"] = a.n_obs;
    j["df"] = a.df;
    j["log_likelihood"] = a.log_likelihood;
    j["penalty"] = a.penalty;
    j["objective"] = a.objective;
    j["bic"] = a.bic;
    j["aic"] = a.aic;
    j["converged"] = a.converged;
    j["status"] = a.status;
    j["iterations"] = a.iterations;
    j["residual"] = a.residual;
    return j;
}

inline auto artifact_from_json(const ordered_json& j) -> ModelArtifact
{
    if (!j.is_object() || !j.contains("schema_version")) {
        throw validation_error{"model artifact: missing schema_version"};
    }
    auto const version = j.at("schema_version").get<int>();
    if (version != artifact_schema_version) {
        throw validation_error{"model artifact: unsupported schema version " +
                               std::to_string(version) + " (expected " +
                               std::to_string(artifact_schema_version) + ")"};
    }
    try {
        ModelArtifact a;
        a.schema_version = version;
        a.tool_version = j.at("tool_version").get<std::string>();
        a.seed = j.at("seed").get<std::uint64_t>();
        a.spec = detail::spec_from_json(j.at("spec"));
        a.x_names = j.at("x_names").get<std::vector<std::string>>();
        a.z_names = j.at("z_names").get<std::vector<std::string>>();
        auto const& coefficients = j.at("coefficients");
        auto const p = a.x_names.size();
        auto const q = a.z_names.size();
        if (coefficients.size() != p + q) {
            throw validation_error{"model artifact: coefficient count does not match names"};
        }
        a.theta = Parameters::zeros(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        for (std::size_t k = 0; k < p + q; ++k) {
            auto const& c = coefficients[k];
            auto const v = c.at("estimate").get<double>();
            if (k < p) {
                a.theta.beta[static_cast<Eigen::Index>(k)] = v;
            }
            else {
                a.theta.gamma[static_cast<Eigen::Index>(k - p)] = v;
            }
            a.standard_errors.push_back(detail::optional_from_json(c.at("se")));
            auto const lower = detail::optional_from_json(c.at("lower"));
            auto const upper = detail::optional_from_json(c.at("upper"));
            if (lower && upper) {
                a.intervals.emplace_back(Interval{*lower, *upper});
            }
            else {
                a.intervals.emplace_back(std::nullopt);
            }
        }
        a.level = j.at("level").get<double>();
        a.se_singular = j.at("se_singular").get<bool>();
        a.n_obs = j.at("n_obs").get<Eigen::Index>();
        a.df = j.at("df").get<Eigen::Index>();
        a.log_likelihood = j.at("log_likelihood").get<double>();
        a.penalty = j.at("penalty").get<double>();
        a.objective = j.at("objective").get<double>();
        a.bic = j.at("bic").get<double>();
        a.aic = j.at("aic").get<double>();
        a.converged = j.at("converged").get<bool>();
        a.status = j.at("status").get<std::string>();
        a.iterations = j.at("iterations").get<std::size_t>();
        a.residual = j.at("residual").get<double>();
        return a;
    }
    catch (const nlohmann::json::exception& ex) {
        throw validation_error{std::string{"model artifact: "} + ex.what()};
    }
}

inline void save_artifact(const ModelArtifact& artifact, const std::filesystem::path& path)
{
    write_text_file_atomic(path, to_json(artifact).dump(2) + "\n");
}

inline auto load_artifact(const std::filesystem::path& path) -> ModelArtifact
{
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path));
    }
    catch (const nlohmann::json::parse_error& ex) {
        throw validation_error{"model artifact '" + path.string() + "': " + ex.what()};
    }
    return artifact_from_json(j);
}

// ============================== Prediction ===============================

/// Event, zero-inflation and marginal probabilities for new rows, read from
/// the columns named in the artifact.
inline auto predict_csv(const ModelArtifact& artifact, const std::filesystem::path& path)
    -> std::vector<MixtureProbabilities>
{
    auto const table = detail::read_table(path);
    auto columns_for = [&](const std::vector<std::string>& names, bool& intercept) {
        std::vector<std::string> cols;
        intercept = !names.empty() && names.front() == intercept_name;
        for (std::size_t k = intercept ? 1 : 0; k < names.size(); ++k) { cols.push_back(names[k]); }
        return cols;
    };
    bool ix = false;
    bool iz = false;
    auto const xcols = columns_for(artifact.x_names, ix);
    auto const zcols = columns_for(artifact.z_names, iz);
    std::vector<std::string> ignored;
    auto const X = detail::design(table, xcols, ix, ignored);
    auto const Z = detail::design(table, zcols, iz, ignored);
    std::vector<MixtureProbabilities> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        out.push_back(mixture_probabilities(artifact.theta, X.row(i).transpose(), Z.row(i).transpose()));
    }
    return out;
}

inline auto predictions_csv(const std::vector<MixtureProbabilities>& rows) -> std::string
{
    std::string out = "row,p,pi,p_zero,p_one\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto const& m = rows[i];
        out += std::to_string(i + 1) + "," + format_double(m.p) + "," + format_double(m.pi) + "," +
               format_double(m.p_zero) + "," + format_double(m.p_one) + "\n";
    }
    return out;
}

inline auto coefficients_csv(const ModelArtifact& a) -> std::string
{
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
    std::string out = "block,name,estimate,se,lower,upper\n";
    auto const flat = a.theta.flat();
    auto const p = static_cast<std::size_t>(a.theta.beta.size());
    for (std::size_t k = 0; k < static_cast<std::size_t>(flat.size()); ++k) {
        auto const& ci = a.intervals[k];
        out += std::string{k < p ? "beta" : "gamma"} + "," +
               csv::quote(k < p ? a.x_names[k] : a.z_names[k - p]) + "," +
               format_double(flat[static_cast<Eigen::Index>(k)]) + "," + cell(a.standard_errors[k]) +
               "," + cell(ci ? std::optional<double>{ci->lower} : std::nullopt) + "," +
               cell(ci ? std::optional<double>{ci->upper} : std::nullopt) + "\n";
    }
    return out;
}

// =============================== Reports =================================

inline auto to_json(const SimulationReport& r) -> ordered_json
{
    ordered_json j;
    j["scenario"] = r.scenario;
    j["n"] = r.n;
    j["replicates"] = r.replicates;
    j["failures"] = r.failures;
    j["seed"] = r.seed;
    j["spec"] = detail::spec_json(r.spec);
    j["level"] = r.level;
    j["se_definition"] = "SD/sqrt(successful replicates)";
    j["mean_log_likelihood"] = r.mean_log_likelihood;
    j["mean_aic"] = r.mean_aic;
    j["mean_rmse"] = r.mean_rmse();
    auto params = ordered_json::array();
    for (auto const& m : r.parameters) {
        ordered_json p;
        p["parameter"] = m.name;
        p["truth"] = m.truth;
        p["mean"] = m.mean;
        p["bias"] = m.bias;
        p["rel_bias"] = detail::optional_json(m.rel_bias);
        p["sd"] = m.sd;
        p["se"] = m.se;
        p["rmse"] = m.rmse;
        p["ci_length"] = detail::optional_json(m.ci_length);
        p["coverage"] = detail::optional_json(m.coverage);
        p["intervals"] = m.interval_count;
        params.push_back(std::move(p));
    }
    j["parameters"] = std::move(params);
    return j;
}

inline auto report_csv_header() -> std::string
{
    return "scenario,n,replicates,failures,family,lambda_beta,lambda_gamma,alpha,parameter,truth,"
           "mean,bias,rel_bias,sd,se,rmse,ci_length,coverage\n";
}

inline auto report_csv_rows(const SimulationReport& r) -> std::string
{
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
    std::string out;
    for (auto const& m : r.parameters) {
        out += csv::quote(r.scenario) + "," + std::to_string(r.n) + "," +
               std::to_string(r.replicates) + "," + std::to_string(r.failures) + "," +
               to_string(r.spec.family) + "," + format_double(r.spec.lambda_beta) + "," +
               format_double(r.spec.lambda_gamma) + "," + format_double(r.spec.alpha) + "," +
               m.name + "," + format_double(m.truth) + "," + format_double(m.mean) + "," +
               format_double(m.bias) + "," + cell(m.rel_bias) + "," + format_double(m.sd) + "," +
               format_double(m.se) + "," + format_double(m.rmse) + "," + cell(m.ci_length) + "," +
               cell(m.coverage) + "\n";
    }
    return out;
}

inline auto to_csv(const SimulationReport& r) -> std::string
{
    return report_csv_header() + report_csv_rows(r);
}

/// Raw replicate estimates, one row per successful replicate.
inline auto estimates_csv(const SimulationReport& r) -> std::string
{
    std::string out = "fit";
    for (auto const& m : r.parameters) { out += "," + m.name; }
    out += "\n";
    for (std::size_t k = 0; k < r.estimates.size(); ++k) {
        out += std::to_string(k + 1);
        for (Eigen::Index j = 0; j < r.estimates[k].size(); ++j) {
            out += "," + format_double(r.estimates[k][j]);
        }
        out += "\n";
    }
    return out;
}

inline auto to_json(const PathResult& path) -> ordered_json
{
    ordered_json j;
    j["criterion"] = to_string(path.rule);
    j["selected_index"] = path.selected ? ordered_json(*path.selected) : ordered_json(nullptr);
    j["selected_lambda"] =
        path.selected ? ordered_json(path.entries[*path.selected].lambda) : ordered_json(nullptr);
    auto entries = ordered_json::array();
    for (auto const& e : path.entries) {
        ordered_json row;
        row["lambda"] = e.lambda;
        if (e.fit) {
            row["status"] = to_string(e.fit->status);
            row["converged"] = e.fit->converged;
            row["iterations"] = e.fit->iterations;
            row["df"] = e.fit->degrees_of_freedom();
            row["active_set_size"] = e.fit->active_set.size();
            row["log_likelihood"] = e.fit->log_likelihood_at_solution;
            row["penalty"] = e.fit->penalty_at_solution;
            row["bic"] = e.bic;
            row["aic"] = e.aic;
            row["beta"] = std::vector<double>(e.fit->theta_hat.beta.begin(), e.fit->theta_hat.beta.end());
            row["gamma"] =
                std::vector<double>(e.fit->theta_hat.gamma.begin(), e.fit->theta_hat.gamma.end());
        }
        else {
            row["status"] = "error";
            row["error"] = e.error;
        }
        row["cv_loss"] = detail::optional_json(e.cv_loss);
        entries.push_back(std::move(row));
    }
    j["path"] = std::move(entries);
    return j;
}

inline auto to_csv(const PathResult& path) -> std::string
{
    std::string out = "lambda,status,df,active_set_size,log_likelihood,penalty,bic,aic,cv_loss,selected\n";
    for (std::size_t i = 0; i < path.entries.size(); ++i) {
        auto const& e = path.entries[i];
        out += format_double(e.lambda) + ",";
        if (e.fit) {
            out += to_string(e.fit->status) + "," + std::to_string(e.fit->degrees_of_freedom()) + "," +
                   std::to_string(e.fit->active_set.size()) + "," +
                   format_double(e.fit->log_likelihood_at_solution) + "," +
                   format_double(e.fit->penalty_at_solution) + "," + format_double(e.bic) + "," +
                   format_double(e.aic) + ",";
        }
        else {
            out += "error,,,,,,,";
        }
        out += (e.cv_loss ? format_double(*e.cv_loss) : std::string{}) + "," +
               (path.selected && *path.selected == i ? "1" : "0") + "\n";
    }
    return out;
}

} // namespace zib
