#include "ccc/forecaster.hpp"

#include "ccc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccc {

VectorXd combine_coefficients(std::size_t window, double sigma) {
    if (window == 0)
        throw DimensionError("weight history is empty");
    if (!(sigma >= 1.0))
        throw ConfigError("sigma must be >= 1");
    VectorXd c(static_cast<Eigen::Index>(window));
    // sigma^-dt relative to sigma^-1, so large sigma cannot underflow the lead term
    double w = 1.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        c(i) = w;
        w /= sigma;
    }
    return c / c.sum();
}

VectorXd combine_weights(std::span<const VectorXd> history, double sigma) {
    const VectorXd c = combine_coefficients(history.size(), sigma);
    VectorXd out = VectorXd::Zero(history.front().size());
    for (std::size_t i = 0; i < history.size(); ++i)
        out += c(static_cast<Eigen::Index>(i)) * history[i];
    return out;
}

SigmaEstimate minimize_sigma(const std::function<double(double)>& loss, const SigmaSearch& search) {
    const double base = loss(1.0);
    if (!(search.sigma_max > 1.0))
        return {1.0, base};

    const std::size_t points = std::max<std::size_t>(search.scan_points, 3);
    const double span = search.sigma_max - 1.0;
    const auto grid = [&](std::size_t i) { return 1.0 + span * static_cast<double>(i) / static_cast<double>(points - 1); };
    std::size_t best = 0;
    double best_loss = base;
    for (std::size_t i = 1; i < points; ++i) {
        const double v = loss(grid(i));
        if (v < best_loss) {
            best_loss = v;
            best = i;
        }
    }

    // golden section inside the neighbouring scan cells
    double lo = grid(best == 0 ? 0 : best - 1);
    double hi = grid(std::min(best + 1, points - 1));
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = loss(x1);
    double f2 = loss(x2);
    while (hi - lo > search.tol) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = loss(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = loss(x2);
        }
    }
    SigmaEstimate estimate{grid(best), best_loss};
    const double mid = 0.5 * (lo + hi);
    for (const SigmaEstimate& candidate : {SigmaEstimate{x1, f1}, SigmaEstimate{x2, f2}, SigmaEstimate{mid, loss(mid)}})
        if (candidate.loss < estimate.loss)
            estimate = candidate;
    if (estimate.loss >= base - 1e-12 * std::max(1.0, std::abs(base)))
        return {1.0, base};
    return estimate;
}

double sigma_loss(const MatrixXd& weights, const MatrixXd& features, const VectorXd& targets, std::size_t window,
                  double sigma) {
    const auto slots = static_cast<std::size_t>(weights.cols());
    const VectorXd c = combine_coefficients(window, sigma);
    double sum = 0.0;
    for (std::size_t t = window; t < slots; ++t) {
        VectorXd w = VectorXd::Zero(weights.rows());
        for (std::size_t dt = 1; dt <= window; ++dt)
            w += c(static_cast<Eigen::Index>(dt - 1)) * weights.col(static_cast<Eigen::Index>(t - dt));
        const double r = features.row(static_cast<Eigen::Index>(t)).dot(w) - targets(static_cast<Eigen::Index>(t));
        sum += r * r;
    }
    return sum;
}

SigmaEstimate estimate_sigma(const MatrixXd& weights, const MatrixXd& features, const VectorXd& targets,
                             std::size_t window, const SigmaSearch& search) {
    const auto slots = static_cast<std::size_t>(weights.cols());
    if (window == 0)
        throw DimensionError("history window must be positive");
    if (slots <= window)
        throw DimensionError("insufficient history: " + std::to_string(slots) + " slots for a window of " +
                             std::to_string(window));
    if (static_cast<std::size_t>(features.rows()) != slots || static_cast<std::size_t>(targets.size()) != slots ||
        features.cols() != weights.rows())
        throw DimensionError("sigma estimation inputs have inconsistent shapes");
    if (window == 1)
        return {1.0, sigma_loss(weights, features, targets, window, 1.0)};
    return minimize_sigma([&](double s) { return sigma_loss(weights, features, targets, window, s); }, search);
}

std::size_t default_history(std::size_t slots) {
    return std::min<std::size_t>(7, slots > 1 ? slots - 1 : 1);
}

namespace {

struct Series {
    MatrixXd weights;
    MatrixXd features;
    VectorXd targets;
};

Series series_for(const ModelState& state, const CrimeTensor& crimes, const FeatureTensor& features, std::size_t n,
                  std::size_t k) {
    const auto T = static_cast<Eigen::Index>(state.slots);
    Series s{state.P[n] + state.q(n, k), MatrixXd(T, static_cast<Eigen::Index>(state.features)), VectorXd(T)};
    for (Eigen::Index t = 0; t < T; ++t) {
        s.features.row(t) = features.at(n, static_cast<std::size_t>(t)).transpose();
        s.targets(t) = crimes(n, static_cast<std::size_t>(t), k);
    }
    return s;
}

} // namespace

ForecastTable fit_forecast(const ModelState& state, const CrimeTensor& crimes, const FeatureTensor& features,
                           const ForecastOptions& options) {
    const std::size_t N = state.regions, T = state.slots, K = state.types;
    if (crimes.regions() != N || crimes.slots() != T || crimes.types() != K || features.regions() != N ||
        features.cells() < T || features.features() != state.features)
        throw DimensionError("forecast inputs do not match the model");
    ForecastTable table;
    table.history = options.history == 0 ? default_history(T) : options.history;
    if (table.history >= T)
        throw DimensionError("insufficient history: window " + std::to_string(table.history) + " needs more than " +
                             std::to_string(T) + " slots");
    table.shared = options.shared_sigma;
    table.sigma = MatrixXd::Ones(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
    table.fit_loss = MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));

    std::vector<Series> all;
    all.reserve(N * K);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k)
            all.push_back(series_for(state, crimes, features, n, k));

    if (options.shared_sigma) {
        const auto total = [&](double sigma) {
            double sum = 0.0;
            for (const auto& s : all)
                sum += sigma_loss(s.weights, s.features, s.targets, table.history, sigma);
            return sum;
        };
        const double sigma =
            table.history == 1 ? 1.0 : minimize_sigma(total, options.search).sigma;
        table.sigma.setConstant(sigma);
        for (std::size_t i = 0; i < all.size(); ++i)
            table.fit_loss(static_cast<Eigen::Index>(i / K), static_cast<Eigen::Index>(i % K)) =
                sigma_loss(all[i].weights, all[i].features, all[i].targets, table.history, sigma);
        return table;
    }

    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto est = estimate_sigma(all[i].weights, all[i].features, all[i].targets, table.history, options.search);
        table.sigma(static_cast<Eigen::Index>(i / K), static_cast<Eigen::Index>(i % K)) = est.sigma;
        table.fit_loss(static_cast<Eigen::Index>(i / K), static_cast<Eigen::Index>(i % K)) = est.loss;
    }
    return table;
}

MatrixXd predict(const ModelState& state, const ForecastTable& table, const MatrixXd& future_features,
                 bool clamp_non_negative) {
    const std::size_t N = state.regions, T = state.slots, K = state.types;
    if (table.history == 0 || table.history > T)
        throw DimensionError("forecast window " + std::to_string(table.history) + " exceeds the " +
                             std::to_string(T) + " trained slots");
    if (static_cast<std::size_t>(future_features.rows()) != N ||
        static_cast<std::size_t>(future_features.cols()) != state.features)
        throw DimensionError("future features must be N x M");
    if (static_cast<std::size_t>(table.sigma.rows()) != N || static_cast<std::size_t>(table.sigma.cols()) != K)
        throw DimensionError("forecast table does not match the model");
    MatrixXd out(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
    std::vector<VectorXd> history(table.history);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t dt = 1; dt <= table.history; ++dt)
                history[dt - 1] = state.weight(n, T - dt, k);
            const VectorXd w = combine_weights(history, table.sigma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
            double y = future_features.row(static_cast<Eigen::Index>(n)).dot(w);
            if (clamp_non_negative)
                y = std::max(y, 0.0);
            out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = y;
        }
    return out;
}

double historical_mean_forecast(std::span<const double> past) {
    if (past.empty())
        throw DimensionError("historical mean needs at least one slot");
    return std::accumulate(past.begin(), past.end(), 0.0) / static_cast<double>(past.size());
}

double last_value_forecast(std::span<const double> past) {
    if (past.empty())
        throw DimensionError("last value needs at least one slot");
    return past.back();
}

BaselineForecasts naive_baselines(const CrimeTensor& crimes, std::size_t window, std::size_t horizon) {
    if (window == 0)
        throw ConfigError("baseline window must be positive");
    BaselineForecasts out;
    const std::size_t N = crimes.regions(), T = crimes.slots(), K = crimes.types();
    std::vector<double> past(window);
    for (std::size_t t0 = window; t0 + horizon <= T; ++t0) {
        const std::size_t last = t0 - 1;
        out.origins.push_back(last);
        MatrixXd mean(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
        MatrixXd lastv(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K));
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t i = 0; i < window; ++i)
                    past[i] = crimes(n, t0 - window + i, k);
                mean(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = historical_mean_forecast(past);
                lastv(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = last_value_forecast(past);
            }
        out.historical_mean.push_back(std::move(mean));
        out.last_value.push_back(std::move(lastv));
    }
    return out;
}

} // namespace ccc
