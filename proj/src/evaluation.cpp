#include "ccc/evaluation.hpp"

#include "ccc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace ccc {

void RunConfig::validate() const {
    hp.validate();
    if (train_window < 2)
        throw ConfigError("train_window must be at least 2");
    if (horizon < 1)
        throw ConfigError("horizon must be at least 1");
    if (!(sigma_max >= 1.0))
        throw ConfigError("sigma_max must be >= 1");
    if (threads == 0)
        throw ConfigError("threads must be positive");
    if (lag == 0)
        throw ConfigError("lag must be positive");
}

void RunConfig::validate(std::size_t slots) const {
    validate();
    if (train_window + horizon > slots)
        throw ConfigError("train_window + horizon = " + std::to_string(train_window + horizon) + " exceeds T = " +
                          std::to_string(slots));
    if (history >= train_window)
        throw ConfigError("history must be smaller than train_window");
}

std::size_t RunConfig::effective_history() const {
    return history == 0 ? default_history(train_window) : history;
}

ForecastOptions RunConfig::forecast_options() const {
    ForecastOptions options;
    options.history = effective_history();
    options.search.sigma_max = sigma_max;
    options.shared_sigma = shared_sigma;
    return options;
}

double rmse(const std::vector<MatrixXd>& predicted, const std::vector<MatrixXd>& observed) {
    if (predicted.empty() || predicted.size() != observed.size())
        throw DimensionError("rmse needs matching, non-empty prediction and observation lists");
    const Eigen::Index N = predicted.front().rows(), K = predicted.front().cols();
    MatrixXd squared = MatrixXd::Zero(N, K);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].rows() != N || predicted[i].cols() != K || observed[i].rows() != N ||
            observed[i].cols() != K)
            throw DimensionError("rmse inputs have inconsistent shapes");
        squared += (predicted[i] - observed[i]).array().square().matrix();
    }
    const double count = static_cast<double>(predicted.size());
    return (squared / count).array().sqrt().sum() / static_cast<double>(N * K);
}

namespace {

struct Trained {
    ModelState state;
    ForecastTable table;
    std::size_t iterations = 0;
    StopReason stop = StopReason::max_iters;
};

// Fits slots [first, first + window) (0-based) and learns sigma.
Trained train_window(const CrimeTensor& crimes, const FeatureTensor& features, const RegionGrid& grid,
                     const RunConfig& config, std::size_t first, std::uint64_t seed) {
    const CrimeTensor y = crimes.window(first, config.train_window);
    const FeatureTensor x = features.window(first, config.train_window);
    const Problem problem(y, x, grid, config.hp);
    FitResult fitted = fit(problem, config.hp, seed);
    Trained out;
    out.table = fit_forecast(fitted.state, y, x, config.forecast_options());
    out.iterations = fitted.report.iterations.size();
    out.stop = fitted.report.stop;
    out.state = std::move(fitted.state);
    return out;
}

MatrixXd observed_slot(const CrimeTensor& crimes, std::size_t t) {
    MatrixXd out(static_cast<Eigen::Index>(crimes.regions()), static_cast<Eigen::Index>(crimes.types()));
    for (std::size_t n = 0; n < crimes.regions(); ++n)
        for (std::size_t k = 0; k < crimes.types(); ++k)
            out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = crimes(n, t, k);
    return out;
}

} // namespace

EvaluationReport evaluate(const CrimeTensor& crimes, const FeatureTensor& features, const RegionGrid& grid,
                          const RunConfig& config) {
    const std::size_t T = crimes.slots();
    config.validate(T);
    if (features.regions() != crimes.regions() || features.cells() < T || grid.regions() != crimes.regions())
        throw DimensionError("evaluation inputs do not agree on N or T");

    const BaselineForecasts baselines = naive_baselines(crimes, config.train_window, config.horizon);
    const std::size_t count = baselines.origins.size();

    EvaluationReport report;
    report.predicted.resize(count);
    report.iterations.resize(count);
    report.stops.resize(count);

    // origin index i has its last training slot at 0-based t0 = train_window - 1 + i
    const auto run_origin = [&](std::size_t i, const Trained* shared) {
        const std::size_t first = i;
        const std::size_t t0 = baselines.origins[i];
        const std::size_t target = t0 + config.horizon;
        Trained local;
        const Trained* model = shared;
        if (!model) {
            local = train_window(crimes, features, grid, config, first, config.seed + t0 + 1);
            model = &local;
        }
        report.predicted[i] = predict(model->state, model->table, features.slot_matrix(target), config.clamp);
        report.iterations[i] = model->iterations;
        report.stops[i] = model->stop;
    };

    if (config.fast) {
        const Trained once = train_window(crimes, features, grid, config, 0, config.seed + config.train_window);
        for (std::size_t i = 0; i < count; ++i)
            run_origin(i, &once);
    } else if (config.threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            run_origin(i, nullptr);
    } else {
        // results land in per-origin slots, so scheduling cannot change them
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::jthread> workers;
        const std::size_t threads = std::min(config.threads, count);
        for (std::size_t w = 0; w < threads; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = w; i < count; i += threads) {
                    try {
                        run_origin(i, nullptr);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                        return;
                    }
                }
            });
        workers.clear();
        if (failure)
            std::rethrow_exception(failure);
    }

    for (std::size_t i = 0; i < count; ++i) {
        report.origins.push_back(baselines.origins[i] + 1);
        report.observed.push_back(observed_slot(crimes, baselines.origins[i] + config.horizon));
    }
    report.last_value = baselines.last_value;
    report.historical_mean = baselines.historical_mean;
    report.ccc_rmse = rmse(report.predicted, report.observed);
    report.last_value_rmse = rmse(report.last_value, report.observed);
    report.historical_mean_rmse = rmse(report.historical_mean, report.observed);
    return report;
}

} // namespace ccc
