#pragma once

#include "ccc/tensors.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ccc {

struct Hyperparams {
    double alpha = 0.1;      // cross-type (task covariance) weight
    double beta = 1.0;       // temporal fusion strength, embedded in A
    double gamma = 1.0;      // spatial power-law exponent, embedded in B
    double rho = 1.0;        // ADMM penalty
    double eta = 1e-3;       // gradient step on P and Q
    double theta = 0.0;      // optional ridge on P and Q
    double eps_omega = 1e-6; // Omega is inverted as (Omega + eps I)^-1
    std::size_t max_iters = 200;
    double tol = 1e-4;
    std::size_t max_halvings = 10;
    // Disables the spatial term entirely (B = 0), the gamma -> infinity limit.
    bool spatial = true;

    void validate() const;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// All optimisation variables of the scaled-form ADMM problem.
//
// Block layout (0-based):
//   P[n]          M x T        shared weights P_n = [P_n^1 .. P_n^T]
//   Q[n*K + k]    M x T        type-specific weights Q_n(k)
//   Omega[n*T+t]  K x K        task covariance of (n, t)
//   C, S [n]      M x (T-1)    C_n = P_n A and its scaled dual
//   D, U [n*K+k]  M x (T-1)    D_n(k) = Q_n(k) A
//   E, V [t]      M x pairs    E^t = P^t B over the active columns of B
//   F, Z [t*K+k]  M x pairs    F^t(k) = Q^t(k) B
struct ModelState {
    std::size_t regions = 0;
    std::size_t slots = 0;
    std::size_t types = 0;
    std::size_t features = 0;
    std::size_t pairs = 0;

    std::vector<MatrixXd> P, Q, Omega;
    std::vector<MatrixXd> C, D, E, F;
    std::vector<MatrixXd> S, U, V, Z;

    static ModelState zeros(std::size_t regions, std::size_t slots, std::size_t types, std::size_t features,
                            std::size_t pairs);

    MatrixXd& q(std::size_t n, std::size_t k) { return Q[n * types + k]; }
    const MatrixXd& q(std::size_t n, std::size_t k) const { return Q[n * types + k]; }
    MatrixXd& omega(std::size_t n, std::size_t t) { return Omega[n * slots + t]; }
    const MatrixXd& omega(std::size_t n, std::size_t t) const { return Omega[n * slots + t]; }

    // Q_n^t = [Q_n^t(1) .. Q_n^t(K)], M x K.
    MatrixXd q_matrix(std::size_t n, std::size_t t) const;
    // P^t = [P_1^t .. P_N^t], M x N.
    MatrixXd p_slot(std::size_t t) const;
    // Q^t(k), M x N.
    MatrixXd q_slot(std::size_t t, std::size_t k) const;
    // W_n^t(k) = P_n^t + Q_n^t(k)
    VectorXd weight(std::size_t n, std::size_t t, std::size_t k) const;

    bool all_finite() const;

    friend bool operator==(const ModelState& a, const ModelState& b);
};

// Training data plus the two difference operators. Holds references: the
// tensors must outlive the problem. Only the first T feature cells are used.
class Problem {
public:
    Problem(const CrimeTensor& crimes, const FeatureTensor& features, const RegionGrid& grid,
            const Hyperparams& hp);
    Problem(const CrimeTensor& crimes, const FeatureTensor& features, DifferenceOperator temporal,
            DifferenceOperator spatial);

    const CrimeTensor& crimes() const noexcept { return *crimes_; }
    const FeatureTensor& features() const noexcept { return *features_; }
    const DifferenceOperator& temporal() const noexcept { return temporal_; }
    const DifferenceOperator& spatial() const noexcept { return spatial_; }

    std::size_t regions() const noexcept { return crimes_->regions(); }
    std::size_t slots() const noexcept { return crimes_->slots(); }
    std::size_t types() const noexcept { return crimes_->types(); }
    std::size_t feature_count() const noexcept { return features_->features(); }
    std::size_t pairs() const noexcept { return spatial_.active_count(); }

    // X_n^t (P_n^t + Q_n^t(k)) - Y_n^t(k)
    double residual(const ModelState& state, std::size_t n, std::size_t t, std::size_t k) const;

private:
    void check() const;

    const CrimeTensor* crimes_;
    const FeatureTensor* features_;
    DifferenceOperator temporal_;
    DifferenceOperator spatial_;
};

struct ObjectiveTerms {
    double loss = 0.0;
    double trace = 0.0;    // alpha * sum tr(Q (Omega + eps I)^-1 Q^T)
    double l1 = 0.0;       // |C|_1 + |D|_1 + |E|_1 + |F|_1
    double penalty = 0.0;  // (rho/2) * squared scaled-constraint terms
    double ridge = 0.0;

    double total() const noexcept { return loss + trace + l1 + penalty + ridge; }
};

// Scaled augmented Lagrangian L_rho, split by term.
ObjectiveTerms objective_terms(const ModelState& state, const Problem& problem, const Hyperparams& hp);
double objective(const ModelState& state, const Problem& problem, const Hyperparams& hp);

// The un-augmented objective: L_rho evaluated at C = PA, D = QA, E = PB,
// F = QB with zero duals.
double unaugmented_objective(const ModelState& state, const Problem& problem, const Hyperparams& hp);

VectorXd grad_P(const ModelState& state, const Problem& problem, const Hyperparams& hp, std::size_t n,
                std::size_t t);
VectorXd grad_Q(const ModelState& state, const Problem& problem, const Hyperparams& hp, std::size_t n,
                std::size_t t, std::size_t k);

struct OmegaUpdate {
    MatrixXd omega;
    bool degenerate = false;
};

// Omega = K (Q^T Q)^(1/2) / tr((Q^T Q)^(1/2)); identity when the trace
// vanishes.
OmegaUpdate update_omega(const MatrixXd& q);

inline double soft_threshold(double x, double kappa) noexcept {
    if (x > kappa)
        return x - kappa;
    if (x < -kappa)
        return x + kappa;
    return 0.0;
}

MatrixXd soft_threshold(const MatrixXd& x, double kappa);

enum class AuxBlock { C, D, E, F };

// Optional instrumentation called from inside a step.
struct StepHooks {
    std::function<void(std::size_t n, std::size_t t, const MatrixXd& omega)> on_omega;
    // `argument` is the prox input (e.g. P_n A + S_n), `result` the new value.
    std::function<void(AuxBlock block, std::size_t index, const MatrixXd& argument, const MatrixXd& result)>
        on_prox;
};

struct StepReport {
    double lagrangian = 0.0;
    // Frobenius norms of PA - C, QA - D, PB - E, QB - F over all blocks.
    double primal_c = 0.0;
    double primal_d = 0.0;
    double primal_e = 0.0;
    double primal_f = 0.0;
    // rho * |aux_new - aux_old| summed over all auxiliary blocks.
    double dual_change = 0.0;
    double eta = 0.0;
    std::size_t halvings = 0;
    std::size_t degenerate_omegas = 0;

    double max_primal() const noexcept;

    friend bool operator==(const StepReport&, const StepReport&) = default;
};

// Runs ADMM iterations on one state, keeping the adaptive step size and the
// divergence baseline between calls.
class AdmmSolver {
public:
    AdmmSolver(const Problem& problem, const Hyperparams& hp, StepHooks hooks = {});

    StepReport step(ModelState& state);

    double eta() const noexcept { return eta_; }
    std::size_t halvings() const noexcept { return halvings_; }

private:
    void sweep_weights(ModelState& state, std::size_t& degenerate) const;
    void update_auxiliaries(ModelState& state, StepReport& report) const;

    const Problem* problem_;
    Hyperparams hp_;
    StepHooks hooks_;
    double eta_;
    std::size_t halvings_ = 0;
    double initial_lagrangian_ = -1.0;
};

// One iteration with a fresh solver.
StepReport admm_step(ModelState& state, const Problem& problem, const Hyperparams& hp);

// Seeded uniform(-0.01, 0.01) draw for every array, Omega = I.
ModelState initial_state(const Problem& problem, std::uint64_t seed);

enum class StopReason { converged, max_iters };

std::string to_string(StopReason reason);

struct FitReport {
    std::vector<StepReport> iterations;
    StopReason stop = StopReason::max_iters;
    double final_eta = 0.0;

    friend bool operator==(const FitReport&, const FitReport&) = default;
};

struct FitResult {
    ModelState state;
    FitReport report;
};

FitResult fit(const Problem& problem, const Hyperparams& hp, std::uint64_t seed, const StepHooks& hooks = {});

// sqrt(mean over (n,t,k) of squared residuals).
double training_rmse(const ModelState& state, const Problem& problem);

} // namespace ccc
