#include "ccc/datagen.hpp"

#include "ccc/csv.hpp"
#include "ccc/dataset.hpp"
#include "ccc/errors.hpp"
#include "ccc/forecaster.hpp"

#include <cmath>
#include <random>

namespace ccc {

void SynthSpec::validate() const {
    if (grid_side == 0 || slots < 2 || types == 0 || features == 0)
        throw ConfigError("synthetic spec needs grid_side >= 1, T >= 2, K >= 1, M >= 1");
    if (lag == 0 || lag >= slots)
        throw ConfigError("lag must be in [1, T)");
    if (segment_length == 0)
        throw ConfigError("segment_length must be positive");
    if (!(noise_sd >= 0.0) || !(spatial_scale >= 0.0) || !(specific_scale >= 0.0))
        throw ConfigError("noise_sd, spatial_scale and specific_scale must be non-negative");
    if (!(task_correlation >= 0.0 && task_correlation <= 1.0))
        throw ConfigError("task_correlation must lie in [0, 1]");
    if (sigma_true) {
        if (!(*sigma_true >= 1.0))
            throw ConfigError("sigma_true must be >= 1");
        if (sigma_history == 0 || sigma_history >= slots)
            throw ConfigError("sigma_history must be in [1, T)");
    }
}

namespace {

class FieldSampler {
public:
    FieldSampler(const SynthSpec& spec, const RegionGrid& grid, std::mt19937_64& rng)
        : spec_(spec), rng_(rng), kernel_(MatrixXd::Identity(grid.regions(), grid.regions())) {
        const auto regions = static_cast<Eigen::Index>(grid.regions());
        if (spec.spatial_scale > 0.0) {
            for (Eigen::Index i = 0; i < regions; ++i) {
                for (Eigen::Index j = 0; j < regions; ++j)
                    kernel_(i, j) = std::exp(-grid.euclidean(i, j) / spec.spatial_scale);
                // unit marginal variance
                kernel_.row(i) /= kernel_.row(i).norm();
            }
        }
    }

    // N x M field, spatially smoothed by the distance kernel.
    MatrixXd draw() {
        MatrixXd z(kernel_.cols(), static_cast<Eigen::Index>(spec_.features));
        for (Eigen::Index m = 0; m < z.cols(); ++m)
            for (Eigen::Index n = 0; n < z.rows(); ++n)
                z(n, m) = normal_(rng_);
        return kernel_ * z;
    }

    // Shared field P* and K correlated type-specific fields Q*(k).
    void draw_slot(MatrixXd& p, std::vector<MatrixXd>& q) {
        p = draw();
        const MatrixXd shared = draw();
        const double a = std::sqrt(spec_.task_correlation);
        const double b = std::sqrt(1.0 - spec_.task_correlation);
        q.resize(spec_.types);
        for (auto& qk : q)
            qk = spec_.specific_scale * (a * shared + b * draw());
    }

private:
    const SynthSpec& spec_;
    std::mt19937_64& rng_;
    std::normal_distribution<double> normal_;
    MatrixXd kernel_;
};

} // namespace

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    const std::size_t N = spec.regions(), T = spec.slots, K = spec.types, M = spec.features;
    const auto m = static_cast<Eigen::Index>(M);
    std::mt19937_64 rng(spec.seed);

    SynthDataset out;
    out.grid = RegionGrid::square(spec.grid_side);
    out.truth.P.assign(N, MatrixXd::Zero(m, static_cast<Eigen::Index>(T)));
    out.truth.Q.assign(N * K, MatrixXd::Zero(m, static_cast<Eigen::Index>(T)));

    FieldSampler sampler(spec, out.grid, rng);
    MatrixXd p;
    std::vector<MatrixXd> q;
    const auto store = [&](std::size_t t) {
        for (std::size_t n = 0; n < N; ++n) {
            const auto row = static_cast<Eigen::Index>(n);
            out.truth.P[n].col(static_cast<Eigen::Index>(t)) = p.row(row).transpose();
            for (std::size_t k = 0; k < K; ++k)
                out.truth.Q[n * K + k].col(static_cast<Eigen::Index>(t)) = q[k].row(row).transpose();
        }
    };

    if (spec.sigma_true) {
        const std::size_t window = spec.sigma_history;
        for (std::size_t t = 0; t < T; ++t) {
            if (t < window) {
                sampler.draw_slot(p, q);
                store(t);
                continue;
            }
            // W^t = sum sigma^-dt W^(t-dt) / sum sigma^-dt, applied to P and Q alike
            for (auto* blocks : {&out.truth.P, &out.truth.Q})
                for (auto& w : *blocks) {
                    std::vector<VectorXd> history;
                    for (std::size_t dt = 1; dt <= window; ++dt)
                        history.emplace_back(w.col(static_cast<Eigen::Index>(t - dt)));
                    w.col(static_cast<Eigen::Index>(t)) = combine_weights(history, *spec.sigma_true);
                }
        }
    } else {
        for (std::size_t t = 0; t < T; ++t) {
            if (t % spec.segment_length == 0)
                sampler.draw_slot(p, q);
            store(t);
        }
    }

    // raw slot s feeds cell s + lag; the leading lag cells stay zero
    out.features = FeatureTensor(N, T + spec.lag, M, spec.lag);
    std::normal_distribution<double> normal;
    for (std::size_t s = 0; s < T; ++s)
        for (std::size_t n = 0; n < N; ++n) {
            auto cell = out.features.at(n, s + spec.lag);
            for (Eigen::Index j = 0; j < m; ++j)
                cell(j) = normal(rng);
        }

    out.truth.clean = CrimeTensor(N, T, K);
    out.crimes = CrimeTensor(N, T, K);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const auto col = static_cast<Eigen::Index>(t);
                const double y =
                    out.features.at(n, t).dot(out.truth.P[n].col(col) + out.truth.Q[n * K + k].col(col));
                out.truth.clean(n, t, k) = y;
                out.crimes(n, t, k) = y;
            }
    out.truth.clean.set_counts(false);
    out.crimes.set_counts(false);

    if (spec.noise_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sd);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < K; ++k)
                    out.crimes(n, t, k) += noise(rng);
    }
    if (spec.poisson) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < K; ++k) {
                    const double mean = std::max(out.crimes(n, t, k), 0.0);
                    out.crimes(n, t, k) =
                        mean > 0.0 ? static_cast<double>(std::poisson_distribution<long>(mean)(rng)) : 0.0;
                }
        out.crimes.set_counts(true);
    }
    return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data) {
    save_dataset(dir, data.crimes, data.features, data.grid);
    const std::size_t N = data.crimes.regions(), T = data.crimes.slots(), K = data.crimes.types();
    const std::size_t M = data.features.features();
    {
        auto out = csv::open_output(dir / "ground_truth_P.csv");
        out << "region_id,time_slot";
        for (std::size_t m = 0; m < M; ++m)
            out << ",w" << m + 1;
        out << '\n';
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t) {
                out << n + 1 << ',' << t + 1;
                for (std::size_t m = 0; m < M; ++m)
                    out << ',' << csv::format_double(data.truth.P[n](m, t));
                out << '\n';
            }
    }
    {
        auto out = csv::open_output(dir / "ground_truth_Q.csv");
        out << "region_id,time_slot,crime_type";
        for (std::size_t m = 0; m < M; ++m)
            out << ",w" << m + 1;
        out << '\n';
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t k = 0; k < K; ++k) {
                    out << n + 1 << ',' << t + 1 << ',' << k + 1;
                    for (std::size_t m = 0; m < M; ++m)
                        out << ',' << csv::format_double(data.truth.Q[n * K + k](m, t));
                    out << '\n';
                }
    }
}

} // namespace ccc
