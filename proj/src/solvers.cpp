#include "sfs/solvers.hpp"

#include <cmath>
#include <numbers>

#include "sfs/errors.hpp"

namespace sfs {

namespace {

// arg with arg(0) pinned to 0; any phase is optimal for zero elements and
// a deterministic choice keeps runs reproducible.
inline double arg0(const Complex& z) {
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    return std::arg(z);
}

Eigen::VectorXcd phasor(const Eigen::VectorXd& a, const Eigen::VectorXd& theta) {
    Eigen::VectorXcd s(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) s(i) = std::polar(a(i), theta(i));
    return s;
}

// Hermitian positive-definite solve with one step of iterative refinement.
Eigen::VectorXcd refined_solve(const Eigen::LDLT<Eigen::MatrixXcd>& factor,
                               const Eigen::MatrixXcd& A, const Eigen::VectorXcd& rhs) {
    Eigen::VectorXcd x = factor.solve(rhs);
    x += factor.solve(rhs - A * x);
    return x;
}

}  // namespace

double gamma_schedule(double omega, double omega_t, double sigma) {
    if (sigma < 0.0) throw ValidationError("gamma_schedule: sigma must be >= 0");
    const double exponent = -(sigma / (2.0 * std::numbers::pi)) * (omega - omega_t);
    return 1.0 / (1.0 + std::exp(exponent));
}

double gamma_at(const GammaMode& mode, double frequency_hz) {
    if (const auto* fixed = std::get_if<FixedGamma>(&mode)) return fixed->value;
    const auto& sig = std::get<SigmoidGamma>(mode);
    return gamma_schedule(2.0 * std::numbers::pi * frequency_hz, sig.omega_t, sig.sigma);
}

void validate_config(const SolverConfig& config) {
    if (config.beta && !(*config.beta >= 0.0))
        throw ValidationError("solver config: beta must be >= 0");
    if (!(config.rho > 0.0)) throw ValidationError("solver config: rho must be > 0");
    if (const auto* fixed = std::get_if<FixedGamma>(&config.gamma_mode)) {
        if (!(fixed->value >= 0.0 && fixed->value <= 1.0))
            throw ValidationError("solver config: fixed gamma must lie in [0, 1]");
    } else {
        const auto& sig = std::get<SigmoidGamma>(config.gamma_mode);
        if (!(sig.sigma >= 0.0))
            throw ValidationError("solver config: sigmoid sigma must be >= 0");
    }
    if (config.max_iters < 1)
        throw ValidationError("solver config: max_iters must be >= 1");
    if (!(config.tol_primal > 0.0))
        throw ValidationError("solver config: tol_primal must be > 0");
    if (!(config.tol_change > 0.0))
        throw ValidationError("solver config: tol_change must be > 0");
}

double default_beta(const TransferMatrix& G) {
    // ||G^H G||_2 is the largest eigenvalue of the (PSD) Gram matrix.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(G.gram(),
                                                        Eigen::EigenvaluesOnly);
    const double spectral = eig.eigenvalues().maxCoeff();
    return spectral * spectral * 1e-3;
}

DrivingSignal solve_pm(const TransferMatrix& G, const PressureVector& u_des,
                       double beta) {
    if (!(beta >= 0.0)) throw ValidationError("solve_pm: beta must be >= 0");
    if (u_des.values.size() != G.rows())
        throw DimensionError("solve_pm: u_des has " +
                             std::to_string(u_des.values.size()) + " entries, G has " +
                             std::to_string(G.rows()) + " rows");

    const Eigen::MatrixXcd& gram = G.gram();

    if (beta == 0.0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram,
                                                            Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        if (!(lo > hi * 1e-12))
            throw IllConditionedError(
                "solve_pm: G^H G is singular with beta = 0; use beta > 0");
    }

    Eigen::MatrixXcd A = gram;
    A.diagonal().array() += beta;
    const Eigen::VectorXcd rhs = G.entries.adjoint() * u_des.values;
    const Eigen::LDLT<Eigen::MatrixXcd> factor(A);

    DrivingSignal out;
    out.values = refined_solve(factor, A, rhs);
    out.frequency_hz = G.frequency_hz;
    out.diagnostics.converged = true;
    out.diagnostics.reason = "closed_form";
    return out;
}

double cost_J(const TransferMatrix& G, const Eigen::VectorXcd& d,
              const PressureVector& u_des, double gamma, double beta) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ValidationError("cost_J: gamma must lie in [0, 1]");
    if (d.size() != G.cols() || u_des.values.size() != G.rows())
        throw DimensionError("cost_J: inconsistent dimensions");

    const Eigen::VectorXcd resid = G.entries * d - u_des.values;
    const Eigen::VectorXd amp_resid =
        (G.entries * d).cwiseAbs() - u_des.values.cwiseAbs();
    return (1.0 - gamma) * resid.squaredNorm() + gamma * amp_resid.squaredNorm() +
           beta * d.squaredNorm();
}

double augmented_lagrangian(const TransferMatrix& G, const PressureVector& u_des,
                            const AdmmState& state, double gamma, double beta,
                            double rho) {
    const Eigen::VectorXcd s = phasor(state.a, state.theta);
    const Eigen::VectorXcd constraint = G.entries * state.d - s;
    const double data_pm = (s - u_des.values).squaredNorm();
    const double data_am = (state.a - u_des.values.cwiseAbs()).squaredNorm();
    const double linear = state.lambda.dot(constraint).real();  // Re[lambda^H r]
    return (1.0 - gamma) * data_pm + gamma * data_am + beta * state.d.squaredNorm() +
           linear + 0.5 * rho * constraint.squaredNorm();
}

AdmmState default_admm_init(const TransferMatrix& G, const PressureVector& u_des,
                            double beta) {
    AdmmState state;
    state.d = solve_pm(G, u_des, beta).values;
    const Eigen::VectorXcd gd = G.entries * state.d;
    state.a = gd.cwiseAbs();
    state.theta.resize(gd.size());
    for (Eigen::Index i = 0; i < gd.size(); ++i) state.theta(i) = arg0(gd(i));
    state.lambda = Eigen::VectorXcd::Zero(gd.size());
    return state;
}

std::pair<DrivingSignal, AdmmState> solve_combined_admm(
    const TransferMatrix& G, const PressureVector& u_des, const SolverConfig& config,
    const std::optional<AdmmState>& init) {
    validate_config(config);
    const Eigen::Index N = G.rows();
    const Eigen::Index L = G.cols();
    if (u_des.values.size() != N)
        throw DimensionError("solve_combined_admm: u_des does not match G rows");

    const double beta = config.beta ? *config.beta : default_beta(G);
    const double rho = config.rho;
    const double gamma = gamma_at(config.gamma_mode, G.frequency_hz);
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ValidationError("solve_combined_admm: gamma must lie in [0, 1]");

    AdmmState state = init ? *init : default_admm_init(G, u_des, beta);
    if (state.d.size() != L || state.a.size() != N || state.theta.size() != N ||
        state.lambda.size() != N)
        throw DimensionError("solve_combined_admm: initial state dimensions mismatch");
    if ((state.a.array() < 0.0).any())
        throw ValidationError("solve_combined_admm: initial amplitudes must be >= 0");

    // d-update system matrix is iteration-independent; factorize once.
    Eigen::MatrixXcd A = G.gram();
    A.diagonal().array() += 2.0 * beta / rho;
    const Eigen::LDLT<Eigen::MatrixXcd> factor(A);

    const Eigen::VectorXd u_abs = u_des.values.cwiseAbs();
    Eigen::VectorXcd gd = G.entries * state.d;

    SolveDiagnostics diag;
    const double primal_target = config.tol_primal * std::sqrt(static_cast<double>(N));

    for (int it = 1; it <= config.max_iters; ++it) {
        // theta and a updates share w = (1-gamma) u + (rho/2)(G d + lambda/rho)
        const Eigen::VectorXcd w = (1.0 - gamma) * u_des.values +
                                   0.5 * rho * (gd + state.lambda / rho);
        for (Eigen::Index i = 0; i < N; ++i) state.theta(i) = arg0(w(i));
        state.a = (2.0 * w.cwiseAbs() + 2.0 * gamma * u_abs) / (rho + 2.0);

        const Eigen::VectorXcd s = phasor(state.a, state.theta);
        const Eigen::VectorXcd rhs = G.entries.adjoint() * (s - state.lambda / rho);
        const Eigen::VectorXcd d_prev = state.d;
        state.d = refined_solve(factor, A, rhs);

        gd = G.entries * state.d;
        const Eigen::VectorXcd r = gd - s;
        const double primal = r.norm();
        state.lambda += rho * r;

        const double cost = (1.0 - gamma) * (gd - u_des.values).squaredNorm() +
                            gamma * (gd.cwiseAbs() - u_abs).squaredNorm() +
                            beta * state.d.squaredNorm();
        diag.primal_residual_history.push_back(primal);
        diag.cost_history.push_back(cost);
        diag.iterations = it;

        if (!state.d.allFinite() || !std::isfinite(primal) || !std::isfinite(cost))
            throw DivergenceError("solve_combined_admm: non-finite values at iteration " +
                                      std::to_string(it),
                                  it);

        const double denom = d_prev.norm();
        const double rel_change =
            (state.d - d_prev).norm() / (denom > 0.0 ? denom : 1e-300);
        if (primal <= primal_target) {
            diag.converged = true;
            diag.reason = "primal_tolerance";
            break;
        }
        if (rel_change <= config.tol_change) {
            diag.converged = true;
            diag.reason = "d_stationary";
            break;
        }
    }
    if (!diag.converged) diag.reason = "max_iterations";

    DrivingSignal out;
    out.values = state.d;
    out.frequency_hz = G.frequency_hz;
    out.diagnostics = std::move(diag);
    return {std::move(out), std::move(state)};
}

std::vector<DrivingSignal> warm_start_sweep(const Scene& scene,
                                            const std::vector<double>& frequencies,
                                            const SolverConfig& config) {
    validate_config(config);
    if (frequencies.empty())
        throw ValidationError("warm_start_sweep: frequency list is empty");
    for (std::size_t i = 1; i < frequencies.size(); ++i)
        if (frequencies[i] < frequencies[i - 1])
            throw ValidationError("warm_start_sweep: frequencies must be ascending");

    std::vector<DrivingSignal> out;
    out.reserve(frequencies.size());
    std::optional<AdmmState> state;
    for (double f : frequencies) {
        const TransferMatrix G = build_transfer_matrix(scene, f, Grid::ControlPoints);
        const PressureVector u = desired_pressure(scene, f, Grid::ControlPoints);
        try {
            auto [signal, next] = solve_combined_admm(G, u, config, state);
            state = std::move(next);
            out.push_back(std::move(signal));
        } catch (const DivergenceError& e) {
            throw DivergenceError("at " + std::to_string(f) + " Hz: " + e.what(),
                                  e.iteration);
        } catch (const IllConditionedError& e) {
            throw IllConditionedError("at " + std::to_string(f) + " Hz: " + e.what());
        }
    }
    return out;
}

}  // namespace sfs
