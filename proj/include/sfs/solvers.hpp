#ifndef SFS_SOLVERS_HPP
#define SFS_SOLVERS_HPP

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sfs/acoustics.hpp"
#include "sfs/scene.hpp"

namespace sfs {

/// Constant blend weight between pressure matching (0) and amplitude
/// matching (1).
struct FixedGamma {
    double value = 0.0;
};

/// Sigmoid blend schedule gamma(omega) = 1 / (1 + e^{-(sigma/2pi)(omega - omega_t)}).
struct SigmoidGamma {
    double omega_t = 0.0;  // transition angular frequency, rad/s
    double sigma = 0.0;
};

using GammaMode = std::variant<FixedGamma, SigmoidGamma>;

double gamma_schedule(double omega, double omega_t, double sigma);

/// Evaluates the configured gamma mode at a frequency in Hz.
double gamma_at(const GammaMode& mode, double frequency_hz);

struct SolverConfig {
    /// Tikhonov weight; empty means the per-frequency default
    /// ||G^H G||_2^2 * 1e-3.
    std::optional<double> beta;
    double rho = 1.0;
    GammaMode gamma_mode = FixedGamma{0.0};
    int max_iters = 200;
    // Defaults sized so the gamma = 0 run lands within 1e-6 of the
    // closed-form pressure-matching solution on the reference scene.
    double tol_primal = 1e-8;
    double tol_change = 1e-10;
};

/// Throws ValidationError when a field is out of range.
void validate_config(const SolverConfig& config);

struct SolveDiagnostics {
    int iterations = 0;
    std::vector<double> primal_residual_history;  // ||G d - a e^{j theta}||_2
    std::vector<double> cost_history;             // J(d)
    bool converged = false;
    std::string reason;  // closed_form | primal_tolerance | d_stationary | max_iterations
};

struct DrivingSignal {
    Eigen::VectorXcd values;
    double frequency_hz = 0.0;
    SolveDiagnostics diagnostics;
};

/// ADMM variables for the splitting G d = a (.) e^{j theta}.
struct AdmmState {
    Eigen::VectorXd a;        // N, nonnegative
    Eigen::VectorXd theta;    // N, radians
    Eigen::VectorXcd d;       // L
    Eigen::VectorXcd lambda;  // N
};

/// Regularization default: spectral norm of G^H G, squared, times 1e-3.
double default_beta(const TransferMatrix& G);

/// Closed-form regularized pressure matching
/// d = (G^H G + beta I)^{-1} G^H u_des. With beta = 0 the Gram matrix must
/// be nonsingular; otherwise IllConditionedError suggests beta > 0.
DrivingSignal solve_pm(const TransferMatrix& G, const PressureVector& u_des,
                       double beta);

/// Composite objective
/// (1-gamma) ||G d - u||^2 + gamma || |G d| - |u| ||^2 + beta ||d||^2.
double cost_J(const TransferMatrix& G, const Eigen::VectorXcd& d,
              const PressureVector& u_des, double gamma, double beta);

/// Augmented Lagrangian of the split problem at the given state.
double augmented_lagrangian(const TransferMatrix& G, const PressureVector& u_des,
                            const AdmmState& state, double gamma, double beta,
                            double rho);

/// Default initialization: pressure-matching d, a = |G d|, theta = arg(G d),
/// lambda = 0.
AdmmState default_admm_init(const TransferMatrix& G, const PressureVector& u_des,
                            double beta);

/// ADMM for the composite cost. Per iteration: theta and a from the phase /
/// amplitude updates, d from the regularized normal equations with the
/// Gram factorization reused across iterations, then the multiplier step.
/// Stops on primal residual <= tol_primal * sqrt(N), relative d change
/// <= tol_change, or max_iters. Returns the solution and the final state
/// for warm starting.
std::pair<DrivingSignal, AdmmState> solve_combined_admm(
    const TransferMatrix& G, const PressureVector& u_des, const SolverConfig& config,
    const std::optional<AdmmState>& init = std::nullopt);

/// Solves an ascending frequency list sequentially, seeding each ADMM run
/// with the previous frequency's final state. Gamma is evaluated per
/// frequency from the configured mode.
std::vector<DrivingSignal> warm_start_sweep(const Scene& scene,
                                            const std::vector<double>& frequencies,
                                            const SolverConfig& config);

}  // namespace sfs

#endif  // SFS_SOLVERS_HPP
