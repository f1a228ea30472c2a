#include "ccc/cli.hpp"

#include "ccc/analytics.hpp"
#include "ccc/checkpoint.hpp"
#include "ccc/csv.hpp"
#include "ccc/datagen.hpp"
#include "ccc/dataset.hpp"
#include "ccc/errors.hpp"
#include "ccc/evaluation.hpp"
#include "ccc/manifest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <optional>

namespace ccc::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kModelFile = "model.ckpt";

// Thrown with the name of the pipeline stage that failed.
struct StageError {
    std::string stage;
    std::exception_ptr cause;
};

template <class F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (...) {
        throw StageError{name, std::current_exception()};
    }
}

// Reads a flat key=value file into the options of `app` that were not given
// on the command line.
void apply_config_file(CLI::App* app, const fs::path& path) {
    if (!fs::is_regular_file(path))
        throw ConfigError("config file not found: " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path.string());
    } catch (const CLI::Error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    for (const auto& item : items) {
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "default"))
            throw ConfigError(path.string() + ": sections are not supported (" + item.fullname() + ")");
        CLI::Option* opt = app->get_option_no_throw("--" + item.name);
        if (!opt || item.name == "config" || item.name == "spec" || item.name == "help")
            throw ConfigError(path.string() + ": unknown key '" + item.name + "'");
        if (opt->count() > 0)
            continue;
        try {
            opt->add_result(item.inputs);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ConfigError(path.string() + ": key '" + item.name + "': " + e.what());
        }
    }
}

void add_run_options(CLI::App* app, RunConfig& c, std::optional<double>& d_min) {
    Hyperparams& hp = c.hp;
    app->add_option("--alpha", hp.alpha, "cross-type weight")->capture_default_str();
    app->add_option("--beta", hp.beta, "temporal fusion strength")->capture_default_str();
    app->add_option("--gamma", hp.gamma, "spatial power-law exponent")->capture_default_str();
    app->add_option("--rho", hp.rho, "ADMM penalty")->capture_default_str();
    app->add_option("--eta", hp.eta, "gradient step")->capture_default_str();
    app->add_option("--theta", hp.theta, "ridge weight")->capture_default_str();
    app->add_option("--eps_omega", hp.eps_omega, "ridge added to Omega before inversion")->capture_default_str();
    app->add_option("--max_iters", hp.max_iters)->capture_default_str();
    app->add_option("--tol", hp.tol)->capture_default_str();
    app->add_option("--max_halvings", hp.max_halvings)->capture_default_str();
    app->add_option("--spatial", hp.spatial, "false disables the spatial term")->capture_default_str();
    app->add_option("--train_window", c.train_window, "slots per training window")->capture_default_str();
    app->add_option("--horizon", c.horizon, "prediction horizon in slots")->capture_default_str();
    app->add_option("--history", c.history, "forecaster window G, 0 for min(7, window - 1)")->capture_default_str();
    app->add_option("--sigma_max", c.sigma_max)->capture_default_str();
    app->add_option("--seed", c.seed)->capture_default_str();
    app->add_option("--deterministic", c.deterministic)->capture_default_str();
    app->add_option("--fast", c.fast, "train once on the first window")->capture_default_str();
    app->add_option("--threads", c.threads, "parallel origins in evaluate")->capture_default_str();
    app->add_option("--shared_sigma", c.shared_sigma)->capture_default_str();
    app->add_option("--clamp", c.clamp, "clamp predictions at zero")->capture_default_str();
    app->add_option("--lag", c.lag, "feature lag in slots")->capture_default_str();
    app->add_option("--d_min", d_min, "distance floor in km");
}

ordered_json config_json(const RunConfig& c, const std::optional<double>& d_min) {
    const Hyperparams& hp = c.hp;
    ordered_json j;
    j["alpha"] = hp.alpha;
    j["beta"] = hp.beta;
    j["gamma"] = hp.gamma;
    j["rho"] = hp.rho;
    j["eta"] = hp.eta;
    j["theta"] = hp.theta;
    j["eps_omega"] = hp.eps_omega;
    j["max_iters"] = hp.max_iters;
    j["tol"] = hp.tol;
    j["max_halvings"] = hp.max_halvings;
    j["spatial"] = hp.spatial;
    j["train_window"] = c.train_window;
    j["horizon"] = c.horizon;
    j["history"] = c.history;
    j["sigma_max"] = c.sigma_max;
    j["seed"] = c.seed;
    j["deterministic"] = c.deterministic;
    j["fast"] = c.fast;
    j["threads"] = c.threads;
    j["shared_sigma"] = c.shared_sigma;
    j["clamp"] = c.clamp;
    j["lag"] = c.lag;
    j["d_min"] = d_min ? ordered_json(*d_min) : ordered_json(nullptr);
    return j;
}

ordered_json hashes(const fs::path& base, const std::vector<std::string>& names) {
    ordered_json j = ordered_json::object();
    for (const auto& name : names)
        j[name] = git_blob_hash_file(base / name);
    return j;
}

ordered_json input_hashes(const fs::path& dir) {
    return hashes(dir, {kCrimesFile, kFeaturesFile, kRegionsFile});
}

void write_json(const fs::path& path, const ordered_json& j) {
    auto out = csv::open_output(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw LoadError(path.string(), "write failed");
}

void write_manifest(const fs::path& dir, const std::string& command, ordered_json config, std::uint64_t seed,
                    ordered_json inputs, const std::vector<std::string>& outputs) {
    ordered_json j;
    j["command"] = command;
    j["manifest_version"] = 1;
    j["seed"] = seed;
    j["config"] = std::move(config);
    j["inputs"] = std::move(inputs);
    j["outputs"] = hashes(dir, outputs);
    write_json(dir / kManifestFile, j);
}

ordered_json matrix_json(const MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json load_json(const LoadReport& r) {
    ordered_json j;
    j["missing_crime_cells"] = r.missing_crime_cells;
    j["missing_feature_rows"] = r.missing_feature_rows;
    j["lag_padded_cells"] = r.lag_padded_cells;
    j["warnings"] = r.warnings;
    return j;
}

// synth ---------------------------------------------------------------------

int cmd_synth(const SynthSpec& spec, const fs::path& out_dir, std::ostream& out) {
    const SynthDataset data = stage("generate", [&] { return generate(spec); });
    stage("write dataset", [&] {
        write_synthetic(out_dir, data);
        ordered_json j;
        j["grid_side"] = spec.grid_side;
        j["slots"] = spec.slots;
        j["types"] = spec.types;
        j["features"] = spec.features;
        j["lag"] = spec.lag;
        j["noise_sd"] = spec.noise_sd;
        j["segment_length"] = spec.segment_length;
        j["spatial_scale"] = spec.spatial_scale;
        j["task_correlation"] = spec.task_correlation;
        j["specific_scale"] = spec.specific_scale;
        j["sigma_true"] = spec.sigma_true ? ordered_json(*spec.sigma_true) : ordered_json(nullptr);
        j["sigma_history"] = spec.sigma_history;
        j["poisson"] = spec.poisson;
        j["seed"] = spec.seed;
        write_manifest(out_dir, "synth", j, spec.seed, ordered_json::object(),
                       {kCrimesFile, kFeaturesFile, kRegionsFile, "ground_truth_P.csv", "ground_truth_Q.csv"});
    });
    out << "synth: wrote N=" << spec.regions() << " T=" << spec.slots << " K=" << spec.types
        << " M=" << spec.features << " to " << out_dir.string() << '\n';
    return kOk;
}

// analyze -------------------------------------------------------------------

void write_curves(const fs::path& path, const std::vector<Curve>& curves, const char* x_name,
                  const char* count_name) {
    auto out = csv::open_output(path);
    out << "crime_type," << x_name << ",mean_abs_diff," << count_name << '\n';
    for (std::size_t k = 0; k < curves.size(); ++k)
        for (const auto& p : curves[k])
            out << k + 1 << ',' << csv::format_double(p.x) << ',' << csv::format_double(p.value) << ','
                << p.samples << '\n';
}

ordered_json curves_json(const std::vector<Curve>& curves) {
    ordered_json all = ordered_json::array();
    for (const auto& curve : curves) {
        ordered_json c = ordered_json::array();
        for (const auto& p : curve)
            c.push_back({{"x", p.x}, {"value", p.value}, {"samples", p.samples}});
        all.push_back(std::move(c));
    }
    return all;
}

int cmd_analyze(const fs::path& data_dir, const fs::path& out_dir, std::size_t lag, std::size_t max_lag,
                double bin_width, std::ostream& out) {
    const Dataset data = stage("load data", [&] { return load_dataset_dir(data_dir, lag); });
    const std::size_t T = data.crimes.slots();
    const std::size_t lags = max_lag == 0 ? std::min<std::size_t>(T - 1, 30) : max_lag;
    const CorrelationReport report = stage("analyze", [&] { return analyze(data.crimes, data.grid, lags, bin_width); });
    stage("write report", [&] {
        write_curves(out_dir / "temporal_curve.csv", report.temporal, "delta_t", "samples");
        write_curves(out_dir / "spatial_curve.csv", report.spatial, "distance_km", "samples");
        const auto K = report.cross_type.value.rows();
        {
            auto csv_out = csv::open_output(out_dir / "cross_type.csv");
            csv_out << "type_i,type_j,similarity\n";
            for (Eigen::Index i = 0; i < K; ++i)
                for (Eigen::Index j = 0; j < K; ++j)
                    csv_out << i + 1 << ',' << j + 1 << ','
                            << (report.cross_type.defined(i, j) ? csv::format_double(report.cross_type.value(i, j))
                                                                : std::string("NA"))
                            << '\n';
        }
        ordered_json cross = ordered_json::array();
        for (Eigen::Index i = 0; i < K; ++i) {
            ordered_json row = ordered_json::array();
            for (Eigen::Index j = 0; j < K; ++j)
                row.push_back(report.cross_type.defined(i, j) ? ordered_json(report.cross_type.value(i, j))
                                                              : ordered_json(nullptr));
            cross.push_back(std::move(row));
        }
        ordered_json j;
        j["regions"] = data.crimes.regions();
        j["slots"] = T;
        j["types"] = data.crimes.types();
        j["max_lag"] = lags;
        j["bin_width_km"] = bin_width;
        j["temporal_curve"] = curves_json(report.temporal);
        j["spatial_curve"] = curves_json(report.spatial);
        j["cross_type"] = std::move(cross);
        j["load"] = load_json(data.report);
        write_json(out_dir / "report.json", j);
        write_manifest(out_dir, "analyze", {{"lag", lag}, {"max_lag", lags}, {"bin_width_km", bin_width}}, 0,
                       input_hashes(data_dir), {"report.json", "temporal_curve.csv", "spatial_curve.csv", "cross_type.csv"});
    });
    out << "analyze: wrote report for K=" << data.crimes.types() << " types to " << out_dir.string() << '\n';
    return kOk;
}

// fit -----------------------------------------------------------------------

int cmd_fit(const fs::path& data_dir, const fs::path& out_dir, const RunConfig& config,
            const std::optional<double>& d_min, std::ostream& out) {
    stage("validate config", [&] { config.validate(); });
    const Dataset data = stage("load data", [&] { return load_dataset_dir(data_dir, config.lag, d_min); });
    const Problem problem = stage("build problem", [&] { return Problem(data.crimes, data.features, data.grid, config.hp); });
    FitResult fitted = stage("fit", [&] { return fit(problem, config.hp, config.seed); });
    Checkpoint ckpt;
    ckpt.hp = config.hp;
    ckpt.lag = config.lag;
    ckpt.forecast = stage("learn sigma", [&] {
        ForecastOptions options = config.forecast_options();
        options.history = config.history == 0 ? default_history(data.crimes.slots()) : config.history;
        return fit_forecast(fitted.state, data.crimes, data.features, options);
    });
    const double train_rmse = training_rmse(fitted.state, problem);
    const double unaugmented = unaugmented_objective(fitted.state, problem, config.hp);
    ckpt.state = std::move(fitted.state);

    stage("write model", [&] {
        save_checkpoint(out_dir / kModelFile, ckpt);
        const StepReport& last = fitted.report.iterations.back();
        ordered_json j;
        j["iterations"] = fitted.report.iterations.size();
        j["stop"] = to_string(fitted.report.stop);
        j["final_eta"] = fitted.report.final_eta;
        j["lagrangian"] = last.lagrangian;
        j["objective"] = unaugmented;
        j["primal_residuals"] = {{"c", last.primal_c}, {"d", last.primal_d}, {"e", last.primal_e}, {"f", last.primal_f}};
        j["training_rmse"] = train_rmse;
        j["history"] = ckpt.forecast.history;
        j["sigma"] = matrix_json(ckpt.forecast.sigma);
        ordered_json trace = ordered_json::array();
        for (const auto& s : fitted.report.iterations)
            trace.push_back({{"lagrangian", s.lagrangian}, {"max_primal", s.max_primal()}, {"eta", s.eta}});
        j["trace"] = std::move(trace);
        j["load"] = load_json(data.report);
        write_json(out_dir / "fit_report.json", j);
        write_manifest(out_dir, "fit", config_json(config, d_min), config.seed, input_hashes(data_dir),
                       {kModelFile, "fit_report.json"});
    });
    out << "fit: " << to_string(fitted.report.stop) << " after " << fitted.report.iterations.size()
        << " iterations, training RMSE " << train_rmse << '\n';
    return kOk;
}

// predict -------------------------------------------------------------------

int cmd_predict(const fs::path& model, const fs::path& features, const fs::path& out_path,
                std::optional<std::size_t> slot, bool clamp, std::ostream& out) {
    const Checkpoint ckpt = stage("load model", [&] { return load_checkpoint(model); });
    const MatrixXd x = stage("load features", [&] { return load_feature_slot(features, ckpt.state.regions, slot); });
    const MatrixXd y = stage("predict", [&] { return predict(ckpt.state, ckpt.forecast, x, clamp); });
    stage("write predictions", [&] {
        auto csv_out = csv::open_output(out_path);
        csv_out << "region_id,crime_type,predicted_count\n";
        for (Eigen::Index n = 0; n < y.rows(); ++n)
            for (Eigen::Index k = 0; k < y.cols(); ++k)
                csv_out << n + 1 << ',' << k + 1 << ',' << csv::format_double(y(n, k)) << '\n';
        if (!csv_out)
            throw LoadError(out_path.string(), "write failed");
    });
    out << "predict: wrote " << y.size() << " predictions to " << out_path.string() << '\n';
    return kOk;
}

// evaluate ------------------------------------------------------------------

int cmd_evaluate(const fs::path& data_dir, const fs::path& out_dir, const RunConfig& config,
                 const std::optional<double>& d_min, std::ostream& out) {
    stage("validate config", [&] { config.validate(); });
    const Dataset data = stage("load data", [&] { return load_dataset_dir(data_dir, config.lag, d_min); });
    const EvaluationReport report =
        stage("evaluate", [&] { return evaluate(data.crimes, data.features, data.grid, config); });
    stage("write report", [&] {
        {
            auto csv_out = csv::open_output(out_dir / "predictions.csv");
            csv_out << "origin,target_slot,region_id,crime_type,predicted,observed,last_value,historical_mean\n";
            for (std::size_t i = 0; i < report.origins.size(); ++i)
                for (Eigen::Index n = 0; n < report.predicted[i].rows(); ++n)
                    for (Eigen::Index k = 0; k < report.predicted[i].cols(); ++k)
                        csv_out << report.origins[i] << ',' << report.origins[i] + config.horizon << ',' << n + 1
                                << ',' << k + 1 << ',' << csv::format_double(report.predicted[i](n, k)) << ','
                                << csv::format_double(report.observed[i](n, k)) << ','
                                << csv::format_double(report.last_value[i](n, k)) << ','
                                << csv::format_double(report.historical_mean[i](n, k)) << '\n';
        }
        ordered_json j;
        j["origins"] = report.origins.size();
        j["train_window"] = config.train_window;
        j["horizon"] = config.horizon;
        j["fast"] = config.fast;
        j["rmse"] = {{"ccc", report.ccc_rmse},
                     {"last_value", report.last_value_rmse},
                     {"historical_mean", report.historical_mean_rmse}};
        ordered_json fits = ordered_json::array();
        for (std::size_t i = 0; i < report.origins.size(); ++i)
            fits.push_back({{"origin", report.origins[i]},
                            {"iterations", report.iterations[i]},
                            {"stop", to_string(report.stops[i])}});
        j["fits"] = std::move(fits);
        j["load"] = load_json(data.report);
        write_json(out_dir / "evaluation.json", j);
        write_manifest(out_dir, "evaluate", config_json(config, d_min), config.seed, input_hashes(data_dir),
                       {"evaluation.json", "predictions.csv"});
    });
    out << "evaluate: " << report.origins.size() << " origins, RMSE ccc " << report.ccc_rmse << ", last value "
        << report.last_value_rmse << ", historical mean " << report.historical_mean_rmse << '\n';
    return kOk;
}

int report_failure(const StageError& failure, const std::string& command, std::ostream& err) {
    try {
        std::rethrow_exception(failure.cause);
    } catch (const NumericError& e) {
        err << "ccc " << command << ": " << failure.stage << ": " << e.what() << '\n';
        return kNumericError;
    } catch (const std::exception& e) {
        err << "ccc " << command << ": " << failure.stage << ": " << e.what() << '\n';
        return kDataError;
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-type crime prediction with shared/specific weights", "ccc"};
    app.require_subcommand(1);
    app.fallthrough(false);

    SynthSpec spec;
    std::optional<fs::path> spec_file;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted weights");
    synth->add_option("--spec", spec_file, "Flat key=value spec file");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--grid_side", spec.grid_side)->capture_default_str();
    synth->add_option("--slots", spec.slots)->capture_default_str();
    synth->add_option("--types", spec.types)->capture_default_str();
    synth->add_option("--features", spec.features)->capture_default_str();
    synth->add_option("--lag", spec.lag)->capture_default_str();
    synth->add_option("--noise_sd", spec.noise_sd)->capture_default_str();
    synth->add_option("--segment_length", spec.segment_length)->capture_default_str();
    synth->add_option("--spatial_scale", spec.spatial_scale)->capture_default_str();
    synth->add_option("--task_correlation", spec.task_correlation)->capture_default_str();
    synth->add_option("--specific_scale", spec.specific_scale)->capture_default_str();
    synth->add_option("--sigma_true", spec.sigma_true);
    synth->add_option("--sigma_history", spec.sigma_history)->capture_default_str();
    synth->add_option("--poisson", spec.poisson)->capture_default_str();
    synth->add_option("--seed", spec.seed)->capture_default_str();

    fs::path analyze_data, analyze_out;
    std::size_t analyze_lag = 1, max_lag = 0;
    double bin_width = 1.0;
    auto* analyze_cmd = app.add_subcommand("analyze", "Temporal, spatial and cross-type correlation curves");
    analyze_cmd->add_option("--data", analyze_data, "Dataset directory")->required();
    analyze_cmd->add_option("--out", analyze_out, "Output directory")->required();
    analyze_cmd->add_option("--lag", analyze_lag, "feature lag in slots")->capture_default_str();
    analyze_cmd->add_option("--max_lag", max_lag, "largest delta t, 0 for min(T - 1, 30)")->capture_default_str();
    analyze_cmd->add_option("--bin_width", bin_width, "distance bin width in km")->capture_default_str();

    RunConfig fit_config;
    std::optional<fs::path> fit_config_file;
    std::optional<double> fit_d_min;
    fs::path fit_data, fit_out;
    auto* fit_cmd = app.add_subcommand("fit", "Train on every slot of a dataset and learn sigma");
    fit_cmd->add_option("--config", fit_config_file, "Flat key=value config file");
    fit_cmd->add_option("--data", fit_data, "Dataset directory")->required();
    fit_cmd->add_option("--out", fit_out, "Output directory")->required();
    add_run_options(fit_cmd, fit_config, fit_d_min);

    fs::path model_path, features_path, predict_out;
    std::optional<std::size_t> slot;
    bool clamp = false;
    auto* predict_cmd = app.add_subcommand("predict", "Predict the next slot from a trained model");
    predict_cmd->add_option("--model", model_path, "Model checkpoint")->required();
    predict_cmd->add_option("--features", features_path, "Features CSV of the target slot")->required();
    predict_cmd->add_option("--out", predict_out, "Predictions CSV")->required();
    predict_cmd->add_option("--slot", slot, "time_slot to read when the file holds several");
    predict_cmd->add_option("--clamp", clamp, "clamp predictions at zero")->capture_default_str();

    RunConfig eval_config;
    std::optional<fs::path> eval_config_file;
    std::optional<double> eval_d_min;
    fs::path eval_data, eval_out;
    auto* eval_cmd = app.add_subcommand("evaluate", "Rolling-origin evaluation against naive baselines");
    eval_cmd->add_option("--config", eval_config_file, "Flat key=value config file");
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "Output directory")->required();
    add_run_options(eval_cmd, eval_config, eval_d_min);

    if (!args.empty() && !args.front().starts_with('-') && !app.get_subcommand_no_throw(args.front())) {
        err << "ccc: unknown command '" << args.front() << "'\n" << app.help();
        return kUsage;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        if (e.get_exit_code() != 0)
            err << app.help();
        return kUsage;
    }

    std::string command;
    try {
        if (synth->parsed()) {
            command = "synth";
            if (spec_file)
                stage("read spec", [&] { apply_config_file(synth, *spec_file); });
            return cmd_synth(spec, synth_out, out);
        }
        if (analyze_cmd->parsed()) {
            command = "analyze";
            return cmd_analyze(analyze_data, analyze_out, analyze_lag, max_lag, bin_width, out);
        }
        if (fit_cmd->parsed()) {
            command = "fit";
            if (fit_config_file)
                stage("read config", [&] { apply_config_file(fit_cmd, *fit_config_file); });
            return cmd_fit(fit_data, fit_out, fit_config, fit_d_min, out);
        }
        if (predict_cmd->parsed()) {
            command = "predict";
            return cmd_predict(model_path, features_path, predict_out, slot, clamp, out);
        }
        if (eval_cmd->parsed()) {
            command = "evaluate";
            if (eval_config_file)
                stage("read config", [&] { apply_config_file(eval_cmd, *eval_config_file); });
            return cmd_evaluate(eval_data, eval_out, eval_config, eval_d_min, out);
        }
    } catch (const StageError& failure) {
        return report_failure(failure, command, err);
    }
    err << app.help();
    return kUsage;
}

} // namespace ccc::cli
