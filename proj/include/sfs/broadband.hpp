#ifndef SFS_BROADBAND_HPP
#define SFS_BROADBAND_HPP

#include <vector>

#include <Eigen/Dense>

#include "sfs/acoustics.hpp"
#include "sfs/solvers.hpp"

namespace sfs {

/// Joint multi-frequency problem: per-bin matching terms plus the
/// differential-norm penalty alpha * sum ||d_f - d_{f-1}||^2 and the shared
/// Tikhonov weight beta.
struct BroadbandProblem {
    std::vector<double> frequencies;        // F, strictly increasing
    std::vector<TransferMatrix> transfer;   // F
    std::vector<Eigen::VectorXcd> desired;  // F
    std::vector<double> gammas;             // F, each in [0, 1]
    double alpha = 0.0;
    double beta = 0.0;
    double rho = 1.0;
};

void validate_problem(const BroadbandProblem& problem);

/// Builds the problem for a scene on DFT bins 1..num_bins of
/// sample_rate / fft_size, with gamma per bin from the config's mode. When
/// config.beta is unset, beta is the mean of the per-bin defaults.
BroadbandProblem make_broadband_problem(const Scene& scene, int num_bins, int fft_size,
                                        double sample_rate_hz, double alpha,
                                        const SolverConfig& config);

/// sum_{f>=2} ||d_f - d_{f-1}||^2; zero for a single bin.
double differential_penalty(const std::vector<Eigen::VectorXcd>& d_seq);

/// Full joint objective value at d_seq.
double broadband_cost(const BroadbandProblem& problem,
                      const std::vector<Eigen::VectorXcd>& d_seq);

/// ADMM with per-bin splitting G_f d_f = a_f (.) e^{j theta_f}. The theta/a
/// and multiplier updates are per bin; the coupled d update solves the
/// Hermitian positive-definite block-tridiagonal normal equations exactly by
/// block Thomas elimination, with the elimination factors precomputed once.
/// Stops when the largest per-bin primal residual is <= tol_primal * sqrt(N)
/// or after max_iters.
std::vector<DrivingSignal> solve_broadband(const BroadbandProblem& problem,
                                           int max_iters = 200,
                                           double tol_primal = 1e-6);

/// Real multichannel FIR filters, one column per loudspeaker.
struct FilterBank {
    Eigen::MatrixXd taps;  // fft_size x L
    double sample_rate_hz = 0.0;
    int modeling_delay_samples = 0;
};

/// Inverse-DFT filter synthesis. The F driving signals must sit on DFT bins
/// 1..F of fft_size (checked to 1e-9 relative). Bin 0, the Nyquist bin and
/// bins above F are zeroed; negative bins are the conjugates, so the taps
/// are real by construction. The modeling delay is applied as linear phase
/// e^{-j 2 pi k delay / fft_size} before inversion.
FilterBank fir_from_spectra(const std::vector<DrivingSignal>& d_seq, int fft_size,
                            double sample_rate_hz, int modeling_delay_samples);

/// Optional raised-cosine fade over the first and last fade_samples taps.
void apply_edge_fade(FilterBank& bank, int fade_samples);

/// Fraction of total tap energy inside a window of window_samples centered
/// on the modeling delay.
double centered_energy_fraction(const FilterBank& bank, int window_samples);

}  // namespace sfs

#endif  // SFS_BROADBAND_HPP
