#include "ccc/solver.hpp"

#include "ccc/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>

namespace ccc {

namespace {

std::string block_name(std::size_t n, std::size_t t, std::size_t k) {
    return "(region " + std::to_string(n + 1) + ", slot " + std::to_string(t + 1) + ", type " +
           std::to_string(k + 1) + ")";
}

void require_finite(double value, const std::string& what) {
    if (!std::isfinite(value))
        throw NumericError("non-finite " + what);
}

// (Omega_n^t + eps I)^-1
MatrixXd regularized_inverse(const MatrixXd& omega, double eps, std::size_t n, std::size_t t) {
    const auto k = omega.rows();
    MatrixXd shifted = omega + eps * MatrixXd::Identity(k, k);
    Eigen::LDLT<MatrixXd> ldlt(shifted);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
        throw SingularityError("task covariance at (region " + std::to_string(n + 1) + ", slot " + std::to_string(t + 1) +
                           ") is singular after the ridge");
    return ldlt.solve(MatrixXd::Identity(k, k));
}

// g += rho * sum over the constraint columns touching `index` of
// op(index, a) * ((W op)_a - aux_a + dual_a), with W's columns from `column_of`.
template <class ColumnOf>
void add_constraint_gradient(VectorXd& g, const DifferenceOperator& op, std::size_t index, double rho,
                             const MatrixXd& aux, const MatrixXd& dual, ColumnOf column_of) {
    for (const auto& cv : op.row(index)) {
        const auto a = static_cast<Eigen::Index>(cv.active);
        const double c = rho * cv.value;
        g += c * (dual.col(a) - aux.col(a));
        for (const auto& rv : op.column(cv.active))
            g += (c * rv.value) * column_of(rv.row);
    }
}

VectorXd grad_Q_with_inverse(const ModelState& state, const Problem& problem, const Hyperparams& hp,
                             std::size_t n, std::size_t t, std::size_t k, const MatrixXd* omega_inverse) {
    const auto col = static_cast<Eigen::Index>(t);
    VectorXd g = (2.0 * problem.residual(state, n, t, k)) * problem.features().at(n, t);

    if (hp.alpha != 0.0) {
        // 2 alpha Q_n^t (Omega + eps I)^-1 e_k
        for (std::size_t j = 0; j < state.types; ++j)
            g += (2.0 * hp.alpha * (*omega_inverse)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) *
                 state.q(n, j).col(col);
    }

    const MatrixXd& qnk = state.q(n, k);
    const std::size_t nk = n * state.types + k;
    add_constraint_gradient(g, problem.temporal(), t, hp.rho, state.D[nk], state.U[nk],
                            [&](std::size_t r) { return qnk.col(static_cast<Eigen::Index>(r)); });
    const std::size_t tk = t * state.types + k;
    add_constraint_gradient(g, problem.spatial(), n, hp.rho, state.F[tk], state.Z[tk],
                            [&](std::size_t r) { return state.q(r, k).col(col); });

    if (hp.theta != 0.0)
        g += 2.0 * hp.theta * qnk.col(col);
    return g;
}

double l1(const MatrixXd& m) { return m.cwiseAbs().sum(); }

} // namespace

void Hyperparams::validate() const {
    const auto non_negative = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError(std::string(name) + " must be finite and non-negative");
    };
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError(std::string(name) + " must be finite and positive");
    };
    non_negative(alpha, "alpha");
    non_negative(beta, "beta");
    non_negative(gamma, "gamma");
    positive(rho, "rho");
    positive(eta, "eta");
    non_negative(theta, "theta");
    positive(eps_omega, "eps_omega");
    positive(tol, "tol");
    if (max_iters == 0)
        throw ConfigError("max_iters must be positive");
}

ModelState ModelState::zeros(std::size_t regions, std::size_t slots, std::size_t types, std::size_t features,
                             std::size_t pairs) {
    if (regions == 0 || slots < 2 || types == 0 || features == 0)
        throw DimensionError("model needs N >= 1, T >= 2, K >= 1, M >= 1");
    const auto m = static_cast<Eigen::Index>(features);
    const auto tt = static_cast<Eigen::Index>(slots);
    const auto kk = static_cast<Eigen::Index>(types);
    const auto pp = static_cast<Eigen::Index>(pairs);
    ModelState s;
    s.regions = regions;
    s.slots = slots;
    s.types = types;
    s.features = features;
    s.pairs = pairs;
    s.P.assign(regions, MatrixXd::Zero(m, tt));
    s.Q.assign(regions * types, MatrixXd::Zero(m, tt));
    s.Omega.assign(regions * slots, MatrixXd::Identity(kk, kk));
    s.C.assign(regions, MatrixXd::Zero(m, tt - 1));
    s.S = s.C;
    s.D.assign(regions * types, MatrixXd::Zero(m, tt - 1));
    s.U = s.D;
    s.E.assign(slots, MatrixXd::Zero(m, pp));
    s.V = s.E;
    s.F.assign(slots * types, MatrixXd::Zero(m, pp));
    s.Z = s.F;
    return s;
}

MatrixXd ModelState::q_matrix(std::size_t n, std::size_t t) const {
    MatrixXd out(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(types));
    for (std::size_t k = 0; k < types; ++k)
        out.col(static_cast<Eigen::Index>(k)) = q(n, k).col(static_cast<Eigen::Index>(t));
    return out;
}

MatrixXd ModelState::p_slot(std::size_t t) const {
    MatrixXd out(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(regions));
    for (std::size_t n = 0; n < regions; ++n)
        out.col(static_cast<Eigen::Index>(n)) = P[n].col(static_cast<Eigen::Index>(t));
    return out;
}

MatrixXd ModelState::q_slot(std::size_t t, std::size_t k) const {
    MatrixXd out(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(regions));
    for (std::size_t n = 0; n < regions; ++n)
        out.col(static_cast<Eigen::Index>(n)) = q(n, k).col(static_cast<Eigen::Index>(t));
    return out;
}

VectorXd ModelState::weight(std::size_t n, std::size_t t, std::size_t k) const {
    return P[n].col(static_cast<Eigen::Index>(t)) + q(n, k).col(static_cast<Eigen::Index>(t));
}

bool ModelState::all_finite() const {
    for (const auto* blocks : {&P, &Q, &Omega, &C, &D, &E, &F, &S, &U, &V, &Z})
        for (const auto& m : *blocks)
            if (!m.allFinite())
                return false;
    return true;
}

bool operator==(const ModelState& a, const ModelState& b) {
    if (a.regions != b.regions || a.slots != b.slots || a.types != b.types || a.features != b.features ||
        a.pairs != b.pairs)
        return false;
    const auto same = [](const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& y) {
        if (x.size() != y.size())
            return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols() || x[i] != y[i])
                return false;
        return true;
    };
    return same(a.P, b.P) && same(a.Q, b.Q) && same(a.Omega, b.Omega) && same(a.C, b.C) && same(a.D, b.D) &&
           same(a.E, b.E) && same(a.F, b.F) && same(a.S, b.S) && same(a.U, b.U) && same(a.V, b.V) &&
           same(a.Z, b.Z);
}

Problem::Problem(const CrimeTensor& crimes, const FeatureTensor& features, const RegionGrid& grid,
                 const Hyperparams& hp)
    : crimes_(&crimes), features_(&features) {
    hp.validate();
    if (grid.regions() != crimes.regions())
        throw DimensionError("region grid has " + std::to_string(grid.regions()) + " regions, crimes have " +
                             std::to_string(crimes.regions()));
    temporal_ = build_temporal_operator(crimes.slots(), hp.beta);
    spatial_ = build_spatial_operator(grid, hp.gamma);
    if (!hp.spatial)
        spatial_ = spatial_.scaled(0.0);
    check();
}

Problem::Problem(const CrimeTensor& crimes, const FeatureTensor& features, DifferenceOperator temporal,
                 DifferenceOperator spatial)
    : crimes_(&crimes), features_(&features), temporal_(std::move(temporal)), spatial_(std::move(spatial)) {
    check();
}

void Problem::check() const {
    if (crimes_->slots() < 2)
        throw DimensionError("training needs at least 2 time slots");
    if (features_->regions() != crimes_->regions() || features_->cells() < crimes_->slots())
        throw DimensionError("feature tensor does not cover the crime tensor");
    if (temporal_.kind() != OperatorKind::temporal || temporal_.rows() != crimes_->slots())
        throw DimensionError("temporal operator does not match T");
    if (spatial_.kind() != OperatorKind::spatial || spatial_.rows() != crimes_->regions())
        throw DimensionError("spatial operator does not match N");
}

double Problem::residual(const ModelState& state, std::size_t n, std::size_t t, std::size_t k) const {
    const auto col = static_cast<Eigen::Index>(t);
    return features_->at(n, t).dot(state.P[n].col(col) + state.q(n, k).col(col)) - (*crimes_)(n, t, k);
}

ObjectiveTerms objective_terms(const ModelState& state, const Problem& problem, const Hyperparams& hp) {
    ObjectiveTerms terms;
    const std::size_t N = state.regions, T = state.slots, K = state.types;

    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const double r = problem.residual(state, n, t, k);
                if (!std::isfinite(r))
                    throw NumericError("non-finite residual at " + block_name(n, t, k));
                terms.loss += r * r;
            }

    if (hp.alpha != 0.0) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t t = 0; t < T; ++t) {
                const MatrixXd qnt = state.q_matrix(n, t);
                const MatrixXd inv = regularized_inverse(state.omega(n, t), hp.eps_omega, n, t);
                const double tr = (qnt * inv).cwiseProduct(qnt).sum();
                if (!std::isfinite(tr))
                    throw NumericError("non-finite trace term at " + block_name(n, t, 0));
                terms.trace += hp.alpha * tr;
            }
    }

    const double half_rho = 0.5 * hp.rho;
    for (std::size_t n = 0; n < N; ++n) {
        const MatrixXd pa = problem.temporal().apply(state.P[n]);
        terms.l1 += l1(state.C[n]);
        terms.penalty += half_rho * (pa - state.C[n] + state.S[n]).squaredNorm();
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t nk = n * K + k;
            const MatrixXd qa = problem.temporal().apply(state.Q[nk]);
            terms.l1 += l1(state.D[nk]);
            terms.penalty += half_rho * (qa - state.D[nk] + state.U[nk]).squaredNorm();
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        const MatrixXd pb = problem.spatial().apply(state.p_slot(t));
        terms.l1 += l1(state.E[t]);
        terms.penalty += half_rho * (pb - state.E[t] + state.V[t]).squaredNorm();
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t tk = t * K + k;
            const MatrixXd qb = problem.spatial().apply(state.q_slot(t, k));
            terms.l1 += l1(state.F[tk]);
            terms.penalty += half_rho * (qb - state.F[tk] + state.Z[tk]).squaredNorm();
        }
    }
    require_finite(terms.l1 + terms.penalty, "penalty terms");

    if (hp.theta != 0.0) {
        double sq = 0.0;
        for (const auto& p : state.P)
            sq += p.squaredNorm();
        for (const auto& q : state.Q)
            sq += q.squaredNorm();
        terms.ridge = hp.theta * sq;
    }
    return terms;
}

double objective(const ModelState& state, const Problem& problem, const Hyperparams& hp) {
    return objective_terms(state, problem, hp).total();
}

double unaugmented_objective(const ModelState& state, const Problem& problem, const Hyperparams& hp) {
    ModelState consistent = state;
    const std::size_t N = state.regions, T = state.slots, K = state.types;
    for (std::size_t n = 0; n < N; ++n) {
        consistent.C[n] = problem.temporal().apply(state.P[n]);
        consistent.S[n].setZero();
        for (std::size_t k = 0; k < K; ++k) {
            consistent.D[n * K + k] = problem.temporal().apply(state.Q[n * K + k]);
            consistent.U[n * K + k].setZero();
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        consistent.E[t] = problem.spatial().apply(state.p_slot(t));
        consistent.V[t].setZero();
        for (std::size_t k = 0; k < K; ++k) {
            consistent.F[t * K + k] = problem.spatial().apply(state.q_slot(t, k));
            consistent.Z[t * K + k].setZero();
        }
    }
    return objective(consistent, problem, hp);
}

VectorXd grad_P(const ModelState& state, const Problem& problem, const Hyperparams& hp, std::size_t n,
                std::size_t t) {
    if (n >= state.regions || t >= state.slots)
        throw BoundsError("grad_P index " + block_name(n, t, 0) + " out of range");
    const auto col = static_cast<Eigen::Index>(t);

    double residual_sum = 0.0;
    for (std::size_t k = 0; k < state.types; ++k)
        residual_sum += problem.residual(state, n, t, k);
    VectorXd g = (2.0 * residual_sum) * problem.features().at(n, t);

    const MatrixXd& pn = state.P[n];
    add_constraint_gradient(g, problem.temporal(), t, hp.rho, state.C[n], state.S[n],
                            [&](std::size_t r) { return pn.col(static_cast<Eigen::Index>(r)); });
    add_constraint_gradient(g, problem.spatial(), n, hp.rho, state.E[t], state.V[t],
                            [&](std::size_t r) { return state.P[r].col(col); });

    if (hp.theta != 0.0)
        g += 2.0 * hp.theta * pn.col(col);
    return g;
}

VectorXd grad_Q(const ModelState& state, const Problem& problem, const Hyperparams& hp, std::size_t n,
                std::size_t t, std::size_t k) {
    if (n >= state.regions || t >= state.slots || k >= state.types)
        throw BoundsError("grad_Q index " + block_name(n, t, k) + " out of range");
    MatrixXd inverse;
    if (hp.alpha != 0.0)
        inverse = regularized_inverse(state.omega(n, t), hp.eps_omega, n, t);
    return grad_Q_with_inverse(state, problem, hp, n, t, k, &inverse);
}

OmegaUpdate update_omega(const MatrixXd& q) {
    if (!q.allFinite())
        throw NumericError("non-finite type-specific weights in covariance update");
    const auto k = q.cols();
    const MatrixXd gram = q.transpose() * q;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericError("eigendecomposition failed in covariance update");
    const VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const double trace = roots.sum();
    if (trace < 1e-12)
        return {MatrixXd::Identity(k, k), true};
    MatrixXd root = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
    MatrixXd omega = (static_cast<double>(k) / trace) * root;
    omega = 0.5 * (omega + omega.transpose()).eval();
    return {std::move(omega), false};
}

MatrixXd soft_threshold(const MatrixXd& x, double kappa) {
    return x.unaryExpr([kappa](double v) { return soft_threshold(v, kappa); });
}

double StepReport::max_primal() const noexcept {
    return std::max(std::max(primal_c, primal_d), std::max(primal_e, primal_f));
}

AdmmSolver::AdmmSolver(const Problem& problem, const Hyperparams& hp, StepHooks hooks)
    : problem_(&problem), hp_(hp), hooks_(std::move(hooks)), eta_(hp.eta) {
    hp_.validate();
}

void AdmmSolver::sweep_weights(ModelState& state, std::size_t& degenerate) const {
    const Problem& problem = *problem_;
    const std::size_t N = state.regions, T = state.slots, K = state.types;
    MatrixXd inverse;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t t = 0; t < T; ++t) {
            const auto col = static_cast<Eigen::Index>(t);
            state.P[n].col(col) -= eta_ * grad_P(state, problem, hp_, n, t);
            if (hp_.alpha != 0.0)
                inverse = regularized_inverse(state.omega(n, t), hp_.eps_omega, n, t);
            for (std::size_t k = 0; k < K; ++k)
                state.q(n, k).col(col) -= eta_ * grad_Q_with_inverse(state, problem, hp_, n, t, k, &inverse);
            auto update = update_omega(state.q_matrix(n, t));
            degenerate += update.degenerate ? 1 : 0;
            state.omega(n, t) = std::move(update.omega);
            if (hooks_.on_omega)
                hooks_.on_omega(n, t, state.omega(n, t));
        }
    }
}

void AdmmSolver::update_auxiliaries(ModelState& state, StepReport& report) const {
    const Problem& problem = *problem_;
    const std::size_t N = state.regions, T = state.slots, K = state.types;
    const double kappa = 1.0 / hp_.rho;

    // aux <- S(W op + dual); dual <- dual + W op - aux
    const auto prox = [&](AuxBlock block, std::size_t index, const MatrixXd& product, MatrixXd& aux, MatrixXd& dual,
                          double& primal) {
        const MatrixXd argument = product + dual;
        MatrixXd next = soft_threshold(argument, kappa);
        if (hooks_.on_prox)
            hooks_.on_prox(block, index, argument, next);
        report.dual_change += hp_.rho * (next - aux).norm();
        aux = std::move(next);
        const MatrixXd residual = product - aux;
        dual += residual;
        primal += residual.squaredNorm();
    };

    for (std::size_t n = 0; n < N; ++n) {
        prox(AuxBlock::C, n, problem.temporal().apply(state.P[n]), state.C[n], state.S[n], report.primal_c);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t nk = n * K + k;
            prox(AuxBlock::D, nk, problem.temporal().apply(state.Q[nk]), state.D[nk], state.U[nk], report.primal_d);
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        prox(AuxBlock::E, t, problem.spatial().apply(state.p_slot(t)), state.E[t], state.V[t], report.primal_e);
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t tk = t * K + k;
            prox(AuxBlock::F, tk, problem.spatial().apply(state.q_slot(t, k)), state.F[tk], state.Z[tk],
                 report.primal_f);
        }
    }
    for (double* r : {&report.primal_c, &report.primal_d, &report.primal_e, &report.primal_f})
        *r = std::sqrt(*r);
}

StepReport AdmmSolver::step(ModelState& state) {
    const Problem& problem = *problem_;
    if (state.regions != problem.regions() || state.slots != problem.slots() || state.types != problem.types() ||
        state.features != problem.feature_count() || state.pairs != problem.pairs())
        throw DimensionError("model state does not match the problem dimensions");

    StepReport report;
    const double before = objective(state, problem, hp_);
    if (initial_lagrangian_ < 0.0)
        initial_lagrangian_ = before;

    // Gradient sweep on P, Q and Omega; retried with half the step while it
    // fails to decrease L_rho.
    const auto saved_p = state.P;
    const auto saved_q = state.Q;
    const auto saved_omega = state.Omega;
    while (true) {
        std::size_t degenerate = 0;
        bool decreased = false;
        try {
            sweep_weights(state, degenerate);
            const double after = objective(state, problem, hp_);
            decreased = after <= before + 1e-12 * std::max(1.0, std::abs(before));
        } catch (const NumericError&) {
            if (halvings_ >= hp_.max_halvings)
                throw;
        }
        report.degenerate_omegas = degenerate;
        if (decreased || halvings_ >= hp_.max_halvings)
            break;
        state.P = saved_p;
        state.Q = saved_q;
        state.Omega = saved_omega;
        eta_ *= 0.5;
        ++halvings_;
        ++report.halvings;
    }

    update_auxiliaries(state, report);

    report.lagrangian = objective(state, problem, hp_);
    report.eta = eta_;
    require_finite(report.lagrangian, "augmented Lagrangian");
    if (report.lagrangian > 1e3 * std::max(initial_lagrangian_, 1e-300) && initial_lagrangian_ > 0.0)
        throw DivergenceError("augmented Lagrangian grew from " + std::to_string(initial_lagrangian_) + " to " +
                              std::to_string(report.lagrangian) + "; try a smaller eta");
    return report;
}

StepReport admm_step(ModelState& state, const Problem& problem, const Hyperparams& hp) {
    AdmmSolver solver(problem, hp);
    return solver.step(state);
}

ModelState initial_state(const Problem& problem, std::uint64_t seed) {
    ModelState state = ModelState::zeros(problem.regions(), problem.slots(), problem.types(), problem.feature_count(),
                                         problem.pairs());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(-0.01, 0.01);
    for (auto* blocks : {&state.P, &state.Q, &state.C, &state.D, &state.E, &state.F, &state.S, &state.U, &state.V,
                         &state.Z})
        for (auto& m : *blocks)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i)
                    m(i, j) = draw(rng);
    return state;
}

std::string to_string(StopReason reason) {
    switch (reason) {
    case StopReason::converged:
        return "converged";
    case StopReason::max_iters:
        return "max_iters";
    }
    return "unknown";
}

FitResult fit(const Problem& problem, const Hyperparams& hp, std::uint64_t seed, const StepHooks& hooks) {
    hp.validate();
    FitResult result{initial_state(problem, seed), {}};
    AdmmSolver solver(problem, hp, hooks);
    double previous = objective(result.state, problem, hp);
    for (std::size_t it = 0; it < hp.max_iters; ++it) {
        StepReport step = solver.step(result.state);
        result.report.iterations.push_back(step);
        const double change = std::abs(step.lagrangian - previous) / std::max(std::abs(previous), 1e-12);
        previous = step.lagrangian;
        if (step.max_primal() < hp.tol && change < hp.tol) {
            result.report.stop = StopReason::converged;
            break;
        }
    }
    result.report.final_eta = solver.eta();
    return result;
}

double training_rmse(const ModelState& state, const Problem& problem) {
    double sum = 0.0;
    for (std::size_t n = 0; n < state.regions; ++n)
        for (std::size_t t = 0; t < state.slots; ++t)
            for (std::size_t k = 0; k < state.types; ++k) {
                const double r = problem.residual(state, n, t, k);
                sum += r * r;
            }
    return std::sqrt(sum / static_cast<double>(state.regions * state.slots * state.types));
}

} // namespace ccc
