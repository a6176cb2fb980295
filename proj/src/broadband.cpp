#include "sfs/broadband.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sfs/errors.hpp"

namespace sfs {

namespace {

inline double arg0(const Complex& z) {
    if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
    return std::arg(z);
}

}  // namespace

void validate_problem(const BroadbandProblem& problem) {
    const std::size_t F = problem.frequencies.size();
    if (F == 0) throw ValidationError("broadband: no frequency bins");
    if (problem.transfer.size() != F || problem.desired.size() != F ||
        problem.gammas.size() != F)
        throw ValidationError("broadband: per-bin lists must all have length F");
    for (std::size_t f = 1; f < F; ++f)
        if (!(problem.frequencies[f] > problem.frequencies[f - 1]))
            throw ValidationError("broadband: frequencies must be strictly increasing");

    const Eigen::Index L = problem.transfer[0].cols();
    for (std::size_t f = 0; f < F; ++f) {
        if (problem.transfer[f].cols() != L)
            throw ValidationError("broadband: transfer matrices disagree on L");
        if (problem.desired[f].size() != problem.transfer[f].rows())
            throw ValidationError("broadband: desired[" + std::to_string(f) +
                                  "] does not match its transfer matrix");
        if (!(problem.gammas[f] >= 0.0 && problem.gammas[f] <= 1.0))
            throw ValidationError("broadband: gamma out of [0, 1] at bin " +
                                  std::to_string(f));
    }
    if (!(problem.alpha >= 0.0)) throw ValidationError("broadband: alpha must be >= 0");
    if (!(problem.beta >= 0.0)) throw ValidationError("broadband: beta must be >= 0");
    if (!(problem.rho > 0.0)) throw ValidationError("broadband: rho must be > 0");
}

BroadbandProblem make_broadband_problem(const Scene& scene, int num_bins, int fft_size,
                                        double sample_rate_hz, double alpha,
                                        const SolverConfig& config) {
    if (fft_size < 4 || fft_size % 2 != 0)
        throw ValidationError("broadband: fft_size must be even and >= 4");
    if (num_bins < 1 || num_bins > fft_size / 2 - 1)
        throw ValidationError("broadband: num_bins must lie in [1, fft_size/2 - 1]");
    if (!(sample_rate_hz > 0.0))
        throw ValidationError("broadband: sample_rate must be > 0");

    const double df = sample_rate_hz / fft_size;
    BroadbandProblem problem;
    problem.alpha = alpha;
    problem.rho = config.rho;
    problem.frequencies.reserve(num_bins);
    problem.transfer.reserve(num_bins);
    problem.desired.reserve(num_bins);
    problem.gammas.reserve(num_bins);

    double beta_sum = 0.0;
    for (int k = 1; k <= num_bins; ++k) {
        const double f = k * df;
        problem.frequencies.push_back(f);
        problem.transfer.push_back(build_transfer_matrix(scene, f, Grid::ControlPoints));
        problem.desired.push_back(desired_pressure(scene, f, Grid::ControlPoints).values);
        problem.gammas.push_back(gamma_at(config.gamma_mode, f));
        if (!config.beta) beta_sum += default_beta(problem.transfer.back());
    }
    problem.beta = config.beta ? *config.beta : beta_sum / num_bins;
    validate_problem(problem);
    return problem;
}

double differential_penalty(const std::vector<Eigen::VectorXcd>& d_seq) {
    if (d_seq.empty()) throw ValidationError("differential_penalty: empty sequence");
    double sum = 0.0;
    for (std::size_t f = 1; f < d_seq.size(); ++f) {
        if (d_seq[f].size() != d_seq[f - 1].size())
            throw DimensionError("differential_penalty: vector lengths differ at bin " +
                                 std::to_string(f));
        sum += (d_seq[f] - d_seq[f - 1]).squaredNorm();
    }
    return sum;
}

double broadband_cost(const BroadbandProblem& problem,
                      const std::vector<Eigen::VectorXcd>& d_seq) {
    validate_problem(problem);
    if (d_seq.size() != problem.frequencies.size())
        throw DimensionError("broadband_cost: d_seq length mismatch");

    double cost = 0.0;
    for (std::size_t f = 0; f < d_seq.size(); ++f) {
        const Eigen::VectorXcd gd = problem.transfer[f].entries * d_seq[f];
        const double gamma = problem.gammas[f];
        cost += (1.0 - gamma) * (gd - problem.desired[f]).squaredNorm();
        cost += gamma *
                (gd.cwiseAbs() - problem.desired[f].cwiseAbs()).squaredNorm();
        cost += problem.beta * d_seq[f].squaredNorm();
    }
    return cost + problem.alpha * differential_penalty(d_seq);
}

namespace {

// Precomputed block Thomas elimination for the joint d update. The system
//   [(rho/2) G_f^H G_f + (beta + c_f alpha) I] d_f - alpha d_{f-1} - alpha d_{f+1}
//     = (rho/2) G_f^H v_f
// has iteration-independent blocks, so the Schur complements
// D~_f = D_f - alpha^2 D~_{f-1}^{-1} and their factorizations are built once.
class BlockTridiagonalSolver {
public:
    BlockTridiagonalSolver(const BroadbandProblem& problem) : alpha_(problem.alpha) {
        const std::size_t F = problem.frequencies.size();
        const Eigen::Index L = problem.transfer[0].cols();
        factors_.reserve(F);
        Eigen::MatrixXcd prev_inverse;
        for (std::size_t f = 0; f < F; ++f) {
            const double c_f = (F == 1) ? 0.0 : ((f == 0 || f + 1 == F) ? 1.0 : 2.0);
            Eigen::MatrixXcd block = 0.5 * problem.rho * problem.transfer[f].gram();
            block.diagonal().array() += problem.beta + c_f * alpha_;
            if (f > 0 && alpha_ > 0.0) block -= (alpha_ * alpha_) * prev_inverse;
            factors_.emplace_back(block);
            if (factors_.back().info() != Eigen::Success)
                throw IllConditionedError(
                    "broadband: d-update block is not positive definite at bin " +
                    std::to_string(f));
            if (f + 1 < F && alpha_ > 0.0)
                prev_inverse =
                    factors_.back().solve(Eigen::MatrixXcd::Identity(L, L));
        }
    }

    // Solves in place: rhs holds r_f on entry and d_f on exit.
    void solve(std::vector<Eigen::VectorXcd>& rhs) const {
        const std::size_t F = factors_.size();
        if (alpha_ > 0.0)
            for (std::size_t f = 1; f < F; ++f)
                rhs[f] += alpha_ * factors_[f - 1].solve(rhs[f - 1]);
        rhs[F - 1] = factors_[F - 1].solve(rhs[F - 1].eval());
        for (std::size_t f = F - 1; f-- > 0;) {
            if (alpha_ > 0.0)
                rhs[f] = factors_[f].solve((rhs[f] + alpha_ * rhs[f + 1]).eval());
            else
                rhs[f] = factors_[f].solve(rhs[f].eval());
        }
    }

private:
    double alpha_;
    std::vector<Eigen::LLT<Eigen::MatrixXcd>> factors_;
};

}  // namespace

std::vector<DrivingSignal> solve_broadband(const BroadbandProblem& problem,
                                           int max_iters, double tol_primal) {
    validate_problem(problem);
    if (max_iters < 1) throw ValidationError("solve_broadband: max_iters must be >= 1");
    if (!(tol_primal > 0.0))
        throw ValidationError("solve_broadband: tol_primal must be > 0");

    const std::size_t F = problem.frequencies.size();
    const double rho = problem.rho;
    const BlockTridiagonalSolver block_solver(problem);

    // Per-bin pressure-matching initialization, as in the single-frequency
    // solver.
    std::vector<Eigen::VectorXcd> d(F), gd(F), lambda(F), s(F);
    std::vector<Eigen::VectorXd> u_abs(F);
    for (std::size_t f = 0; f < F; ++f) {
        const PressureVector u{problem.desired[f], problem.frequencies[f]};
        d[f] = solve_pm(problem.transfer[f], u, problem.beta).values;
        gd[f] = problem.transfer[f].entries * d[f];
        lambda[f] = Eigen::VectorXcd::Zero(problem.desired[f].size());
        u_abs[f] = problem.desired[f].cwiseAbs();
    }

    std::vector<SolveDiagnostics> diag(F);
    bool converged = false;
    int iterations = 0;

    for (int it = 1; it <= max_iters && !converged; ++it) {
        iterations = it;
        std::vector<Eigen::VectorXcd> rhs(F);
        for (std::size_t f = 0; f < F; ++f) {
            const double gamma = problem.gammas[f];
            const Eigen::VectorXcd w = (1.0 - gamma) * problem.desired[f] +
                                       0.5 * rho * (gd[f] + lambda[f] / rho);
            Eigen::VectorXd theta(w.size());
            for (Eigen::Index i = 0; i < w.size(); ++i) theta(i) = arg0(w(i));
            const Eigen::VectorXd a =
                (2.0 * w.cwiseAbs() + 2.0 * gamma * u_abs[f]) / (rho + 2.0);
            s[f].resize(a.size());
            for (Eigen::Index i = 0; i < a.size(); ++i)
                s[f](i) = std::polar(a(i), theta(i));
            rhs[f] = 0.5 * rho *
                     (problem.transfer[f].entries.adjoint() * (s[f] - lambda[f] / rho));
        }

        block_solver.solve(rhs);

        double max_scaled_residual = 0.0;
        for (std::size_t f = 0; f < F; ++f) {
            d[f] = std::move(rhs[f]);
            gd[f] = problem.transfer[f].entries * d[f];
            const Eigen::VectorXcd r = gd[f] - s[f];
            const double primal = r.norm();
            lambda[f] += rho * r;

            const double gamma = problem.gammas[f];
            const double bin_cost =
                (1.0 - gamma) * (gd[f] - problem.desired[f]).squaredNorm() +
                gamma * (gd[f].cwiseAbs() - u_abs[f]).squaredNorm() +
                problem.beta * d[f].squaredNorm();
            diag[f].primal_residual_history.push_back(primal);
            diag[f].cost_history.push_back(bin_cost);
            diag[f].iterations = it;

            if (!d[f].allFinite() || !std::isfinite(primal))
                throw DivergenceError("solve_broadband: non-finite values at iteration " +
                                          std::to_string(it) + ", bin " +
                                          std::to_string(f),
                                      it);
            const double n = std::sqrt(static_cast<double>(problem.desired[f].size()));
            max_scaled_residual = std::max(max_scaled_residual, primal / n);
        }
        converged = max_scaled_residual <= tol_primal;
    }

    std::vector<DrivingSignal> out(F);
    for (std::size_t f = 0; f < F; ++f) {
        diag[f].converged = converged;
        diag[f].reason = converged ? "primal_tolerance" : "max_iterations";
        diag[f].iterations = iterations;
        out[f].values = std::move(d[f]);
        out[f].frequency_hz = problem.frequencies[f];
        out[f].diagnostics = std::move(diag[f]);
    }
    return out;
}

FilterBank fir_from_spectra(const std::vector<DrivingSignal>& d_seq, int fft_size,
                            double sample_rate_hz, int modeling_delay_samples) {
    if (fft_size < 4 || fft_size % 2 != 0)
        throw ValidationError("fir_from_spectra: fft_size must be even and >= 4");
    if (!(sample_rate_hz > 0.0))
        throw ValidationError("fir_from_spectra: sample_rate must be > 0");
    if (modeling_delay_samples < 0)
        throw ValidationError("fir_from_spectra: modeling delay must be >= 0");
    const auto F = static_cast<int>(d_seq.size());
    if (F < 1) throw ValidationError("fir_from_spectra: empty spectrum list");
    if (F > fft_size / 2 - 1)
        throw ValidationError("fir_from_spectra: more bins than fft_size/2 - 1");

    const Eigen::Index L = d_seq[0].values.size();
    const double df = sample_rate_hz / fft_size;
    for (int k = 1; k <= F; ++k) {
        if (d_seq[k - 1].values.size() != L)
            throw DimensionError("fir_from_spectra: loudspeaker counts differ at bin " +
                                 std::to_string(k));
        const double expected = k * df;
        if (std::abs(d_seq[k - 1].frequency_hz - expected) > 1e-9 * expected)
            throw GridError("fir_from_spectra: bin " + std::to_string(k) +
                            " frequency " + std::to_string(d_seq[k - 1].frequency_hz) +
                            " Hz does not match DFT bin at " + std::to_string(expected) +
                            " Hz");
    }

    // Hermitian-symmetric spectrum (DC, Nyquist and bins above F are zero)
    // inverted directly as a cosine sum, so the taps are exactly real.
    FilterBank bank;
    bank.taps = Eigen::MatrixXd::Zero(fft_size, L);
    bank.sample_rate_hz = sample_rate_hz;
    bank.modeling_delay_samples = modeling_delay_samples;

    const double two_pi = 2.0 * std::numbers::pi;
    for (Eigen::Index l = 0; l < L; ++l) {
        for (int k = 1; k <= F; ++k) {
            const Complex spec = d_seq[k - 1].values(l);
            const double mag = std::abs(spec);
            if (mag == 0.0) continue;
            const double phase = std::arg(spec);
            for (int t = 0; t < fft_size; ++t) {
                const double angle =
                    two_pi * k * (t - modeling_delay_samples) / fft_size + phase;
                bank.taps(t, l) += (2.0 / fft_size) * mag * std::cos(angle);
            }
        }
    }
    return bank;
}

void apply_edge_fade(FilterBank& bank, int fade_samples) {
    const auto T = static_cast<int>(bank.taps.rows());
    if (fade_samples < 0 || 2 * fade_samples > T)
        throw ValidationError("apply_edge_fade: fade length must fit in the taps");
    for (int t = 0; t < fade_samples; ++t) {
        const double w =
            0.5 * (1.0 - std::cos(std::numbers::pi * (t + 0.5) / fade_samples));
        bank.taps.row(t) *= w;
        bank.taps.row(T - 1 - t) *= w;
    }
}

double centered_energy_fraction(const FilterBank& bank, int window_samples) {
    const auto T = static_cast<int>(bank.taps.rows());
    if (window_samples < 1 || window_samples > T)
        throw ValidationError("centered_energy_fraction: window must fit in the taps");
    const double total = bank.taps.squaredNorm();
    if (total == 0.0) return 0.0;

    int lo = bank.modeling_delay_samples - window_samples / 2;
    lo = std::max(0, std::min(lo, T - window_samples));
    return bank.taps.middleRows(lo, window_samples).squaredNorm() / total;
}

}  // namespace sfs
