#pragma once

#include "zib/io.hpp"
#include "zib/optimizer.hpp"
#include "zib/penalty.hpp"
#include "zib/selection.hpp"
#include "zib/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

/// \file cli.hpp
///
/// The `zib` command line: fit, select, simulate and predict.
///
/// Exit codes: 0 success, 1 usage or validation error, 2 numerical failure
/// (including a fit that did not converge).

namespace zib {

/// Everything a single invocation can be configured with. A config file
/// (TOML or INI, via --config) supplies defaults; flags override it.
struct RunConfig {
    std::string input;
    ColumnRoles roles;
    std::string method = "ridge";
    double lambda = 0.0;
    std::optional<double> lambda_beta;
    std::optional<double> lambda_gamma;
    double alpha = 0.5;
    bool exempt_intercepts = false;
    bool scale_by_n = false;
    FitOptions fit;
    std::vector<double> grid;
    std::string criterion = "bic";
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    double level = 0.95;
    std::string output;
    std::string format = "json";

    // simulate
    int scenario = 1;
    Eigen::Index n = 500;
    std::size_t replicates = 200;
    std::string dump_estimates;

    // predict
    std::string model;
    std::string predict_format = "csv";

    [[nodiscard]] auto penalty() const -> PenaltySpec
    {
        PenaltySpec spec;
        if (method == "none") {
            spec = PenaltySpec::none();
        }
        else {
            spec = PenaltySpec::make(parse_penalty_family(method), lambda, alpha);
        }
        if (lambda_beta) { spec.lambda_beta = *lambda_beta; }
        if (lambda_gamma) { spec.lambda_gamma = *lambda_gamma; }
        spec.penalize_intercepts = !exempt_intercepts;
        spec.scale_by_n = scale_by_n;
        validate_penalty(spec);
        return spec;
    }

    [[nodiscard]] auto lambda_grid() const -> LambdaGrid
    {
        if (grid.empty()) { return LambdaGrid::default_grid(); }
        LambdaGrid g{grid};
        validate_grid(g);
        return g;
    }
};

namespace detail {
    inline void add_penalty_options(CLI::App& cmd, RunConfig& cfg)
    {
        cmd.add_option("--method", cfg.method, "Penalty family: lasso, ridge, elastic_net or none")
            ->check(CLI::IsMember({"lasso", "ridge", "elastic_net", "enet", "elastic-net", "none"}));
        cmd.add_option("--lambda", cfg.lambda, "Penalty strength for both blocks");
        cmd.add_option("--lambda-beta", cfg.lambda_beta, "Penalty strength for the event block");
        cmd.add_option("--lambda-gamma", cfg.lambda_gamma,
                       "Penalty strength for the zero-inflation block");
        cmd.add_option("--alpha", cfg.alpha, "Elastic-net mixing weight in [0, 1]");
        cmd.add_flag("--exempt-intercepts", cfg.exempt_intercepts,
                     "Leave the first column of X and of Z unpenalized");
        cmd.add_flag("--scale-by-n", cfg.scale_by_n, "Multiply penalty strengths by n");
        cmd.add_option("--max-iter", cfg.fit.max_iterations, "Iteration limit per fit");
        cmd.add_option("--tol", cfg.fit.objective_tolerance, "Relative objective tolerance");
        cmd.add_option("--gtol", cfg.fit.gradient_tolerance, "Optimality residual tolerance");
    }

    inline void add_data_options(CLI::App& cmd, RunConfig& cfg)
    {
        cmd.add_option("--input", cfg.input, "CSV file with a header row")->required();
        cmd.add_option("--response", cfg.roles.response, "Binary response column")->required();
        cmd.add_option("--x", cfg.roles.x_columns, "Event-model columns (comma separated)")
            ->delimiter(',');
        cmd.add_option("--z", cfg.roles.z_columns, "Zero-inflation columns (comma separated)")
            ->delimiter(',');
        cmd.add_flag("--x-intercept", cfg.roles.add_intercept_x, "Prepend an intercept column to X");
        cmd.add_flag("--z-intercept", cfg.roles.add_intercept_z, "Prepend an intercept column to Z");
    }

    inline void add_output_options(CLI::App& cmd, RunConfig& cfg)
    {
        cmd.add_option("--output,-o", cfg.output, "Output file (default: standard output)");
        cmd.add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    }

    inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out)
    {
        if (cfg.output.empty()) {
            out << text;
        }
        else {
            write_text_file_atomic(cfg.output, text);
        }
    }

    inline auto cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) -> int
    {
        auto const loaded = load_csv(cfg.input, cfg.roles);
        auto const spec = cfg.penalty();
        auto const result = fit_penalized(loaded.data, spec, cfg.fit);
        auto const artifact = make_artifact(result, loaded, cfg.level, cfg.seed);
        if (cfg.format == "csv") {
            emit(cfg, coefficients_csv(artifact), out);
        }
        else if (cfg.output.empty()) {
            out << to_json(artifact).dump(2) << "\n";
        }
        else {
            save_artifact(artifact, cfg.output);
        }
        if (artifact.se_singular) {
            err << "warning: observed information is singular on the active set; "
                   "some standard errors are unavailable\n";
        }
        if (!result.converged) {
            err << "error: fit did not converge (status " << artifact.status << ", residual "
                << format_double(result.residual) << ")\n";
            return 2;
        }
        return 0;
    }

    inline auto cmd_select(const RunConfig& cfg, std::ostream& out, std::ostream& err) -> int
    {
        auto const loaded = load_csv(cfg.input, cfg.roles);
        auto const spec = cfg.penalty();
        auto const grid = cfg.lambda_grid();
        auto const rule = parse_selection_rule(cfg.criterion);
        auto const path = rule == SelectionRule::cv
                              ? cross_validate(loaded.data, spec, grid, cfg.folds, cfg.seed, cfg.fit)
                              : lambda_path(loaded.data, spec, grid, cfg.fit, rule);
        emit(cfg, cfg.format == "csv" ? to_csv(path) : to_json(path).dump(2) + "\n", out);
        if (!path.selected) {
            err << "error: no grid value produced a usable fit\n";
            return 2;
        }
        return 0;
    }

    inline auto cmd_simulate(const RunConfig& cfg, bool sweep, std::ostream& out) -> int
    {
        auto const scenario = builtin_scenario(cfg.scenario);
        auto const spec = cfg.penalty();
        StudyOptions study;
        study.threads = std::max<std::size_t>(1, cfg.threads);
        study.level = cfg.level;
        std::vector<SimulationReport> reports;
        if (sweep) {
            reports = run_lambda_sweep(scenario, cfg.n, cfg.replicates, spec, cfg.lambda_grid(),
                                       cfg.fit, cfg.seed, study);
        }
        else {
            reports.push_back(
                run_study(scenario, cfg.n, cfg.replicates, spec, cfg.fit, cfg.seed, study));
        }

        std::string text;
        if (cfg.format == "csv") {
            text = report_csv_header();
            for (auto const& r : reports) { text += report_csv_rows(r); }
        }
        else if (sweep) {
            ordered_json j;
            j["reports"] = ordered_json::array();
            for (auto const& r : reports) { j["reports"].push_back(to_json(r)); }
            text = j.dump(2) + "\n";
        }
        else {
            text = to_json(reports.front()).dump(2) + "\n";
        }
        emit(cfg, text, out);

        if (!cfg.dump_estimates.empty()) {
            std::string dump;
            for (std::size_t k = 0; k < reports.size(); ++k) {
                auto block = estimates_csv(reports[k]);
                if (sweep) {
                    // prefix every line with the grid value; keep one header
                    std::string prefixed;
                    std::size_t start = 0;
                    bool header = true;
                    while (start < block.size()) {
                        auto const end = block.find('\n', start);
                        auto const line = block.substr(start, end - start);
                        if (!header || k == 0) {
                            prefixed += (header ? std::string{"lambda"}
                                                : format_double(reports[k].spec.lambda_beta)) +
                                        "," + line + "\n";
                        }
                        header = false;
                        start = end + 1;
                    }
                    block = std::move(prefixed);
                }
                dump += block;
            }
            write_text_file_atomic(cfg.dump_estimates, dump);
        }
        return 0;
    }

    inline auto cmd_predict(const RunConfig& cfg, std::ostream& out) -> int
    {
        auto const artifact = load_artifact(cfg.model);
        auto const rows = predict_csv(artifact, cfg.input);
        if (cfg.predict_format == "json") {
            auto arr = ordered_json::array();
            for (std::size_t i = 0; i < rows.size(); ++i) {
                ordered_json r;
                r["row"] = i + 1;
                r["p"] = rows[i].p;
                r["pi"] = rows[i].pi;
                r["p_zero"] = rows[i].p_zero;
                r["p_one"] = rows[i].p_one;
                arr.push_back(std::move(r));
            }
            emit(cfg, arr.dump(2) + "\n", out);
        }
        else {
            emit(cfg, predictions_csv(rows), out);
        }
        return 0;
    }
} // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline auto run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) -> int
{
    CLI::App app{"Zero-inflated Bernoulli regression with lasso, ridge and elastic-net penalties",
                 "zib"};
    app.set_version_flag("--version", std::string{tool_version});
    app.set_config("--config", "", "TOML or INI file with option defaults; flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();

    RunConfig cfg;

    auto* fit = app.add_subcommand("fit", "Fit one model and write a model artifact");
    detail::add_data_options(*fit, cfg);
    detail::add_penalty_options(*fit, cfg);
    detail::add_output_options(*fit, cfg);
    fit->add_option("--level", cfg.level, "Confidence level of Wald intervals");
    fit->add_option("--seed", cfg.seed, "Seed recorded in the artifact");

    auto* select = app.add_subcommand("select", "Fit a lambda path and select by BIC, AIC or CV");
    detail::add_data_options(*select, cfg);
    detail::add_penalty_options(*select, cfg);
    detail::add_output_options(*select, cfg);
    select->add_option("--criterion", cfg.criterion, "bic, aic or cv")
        ->check(CLI::IsMember({"bic", "aic", "cv"}));
    select->add_option("--grid", cfg.grid, "Lambda values (comma separated, increasing)")
        ->delimiter(',');
    select->add_option("--folds", cfg.folds, "Cross-validation folds");
    select->add_option("--seed", cfg.seed, "Fold assignment seed");

    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study on a built-in scenario");
    detail::add_penalty_options(*simulate, cfg);
    detail::add_output_options(*simulate, cfg);
    simulate->add_option("--scenario", cfg.scenario, "Built-in scenario (1 or 2)")
        ->check(CLI::IsMember({1, 2}));
    simulate->add_option("--n", cfg.n, "Observations per replicate")->check(CLI::PositiveNumber);
    simulate->add_option("--N", cfg.replicates, "Number of replicates");
    auto* sweep = simulate->add_option("--grid", cfg.grid,
                                       "Run one study per lambda (comma separated, increasing)")
                      ->delimiter(',');
    simulate->add_option("--seed", cfg.seed, "Master seed");
    simulate->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);
    simulate->add_option("--level", cfg.level, "Confidence level of Wald intervals");
    simulate->add_option("--dump-estimates", cfg.dump_estimates,
                         "Write raw per-replicate estimates to this CSV file");

    auto* predict = app.add_subcommand("predict", "Predict p, pi and P(Y=1) for new rows");
    predict->add_option("--model", cfg.model, "Model artifact written by `fit`")->required();
    predict->add_option("--input", cfg.input, "CSV with the model's X and Z columns")->required();
    predict->add_option("--output,-o", cfg.output, "Output file (default: standard output)");
    predict->add_option("--format", cfg.predict_format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    }
    catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    }
    catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        if (fit->parsed()) { return detail::cmd_fit(cfg, out, err); }
        if (select->parsed()) { return detail::cmd_select(cfg, out, err); }
        if (simulate->parsed()) { return detail::cmd_simulate(cfg, sweep->count() > 0, out); }
        if (predict->parsed()) { return detail::cmd_predict(cfg, out); }
    }
    catch (const numerical_error& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    }
    catch (const study_error& e) {
        err << "study failed: " << e.what() << "\n";
        return 2;
    }
    catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    catch (const io_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace zib
