#ifndef SFS_METRICS_HPP
#define SFS_METRICS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfs/acoustics.hpp"
#include "sfs/solvers.hpp"

namespace sfs {

/// ||G d - u_des||^2 / ||u_des||^2. Errors on a zero desired field.
double discrete_synthesis_error(const TransferMatrix& G, const Eigen::VectorXcd& d,
                                const Eigen::VectorXcd& u_des);

/// || |G d| - |u_des| ||^2 / ||u_des||^2.
double amplitude_error(const TransferMatrix& G, const Eigen::VectorXcd& d,
                       const Eigen::VectorXcd& u_des);

struct AmplitudeResponse {
    std::vector<double> frequencies;
    std::vector<double> magnitude_db;  // 20 log10 |u|, floored at -200 dB
};

/// Synthesized magnitude response at a point, one value per driving signal.
AmplitudeResponse amplitude_response_at(const Point3& point, const Scene& scene,
                                        const std::vector<DrivingSignal>& d_seq);

/// Desired-field magnitude response at a point on the given frequency grid.
AmplitudeResponse desired_response_at(const Point3& point, const Scene& scene,
                                      const std::vector<double>& frequencies);

/// Standard deviation (population) of resp - desired in dB over
/// [f_lo, f_hi]; invariant to constant dB offsets.
double flatness_std_db(const AmplitudeResponse& resp, const AmplitudeResponse& desired,
                       double f_lo, double f_hi);

/// Loudspeaker-to-ear transfer functions on a
/// [position][azimuth][frequency][loudspeaker] lattice.
struct BinauralSet {
    std::vector<Point3> positions;   // head centers
    std::vector<double> azimuths;    // radians
    std::vector<double> frequencies; // Hz, ascending
    Eigen::Index num_loudspeakers = 0;
    std::vector<Complex> left;   // flattened lattice
    std::vector<Complex> right;

    std::size_t index(std::size_t pos, std::size_t az, std::size_t freq,
                      Eigen::Index spk) const {
        return ((pos * azimuths.size() + az) * frequencies.size() + freq) *
                   static_cast<std::size_t>(num_loudspeakers) +
               static_cast<std::size_t>(spk);
    }

    void validate() const;
};

/// Free-field "ear pair" stand-in: two monopole receivers 0.09 m left and
/// right of the head center, no head shadowing. Non-physical; for smoke
/// tests only — real evaluations should import measured or BEM-computed
/// ear transfer functions.
BinauralSet synthetic_binaural(const Scene& scene,
                               const std::vector<Point3>& head_positions,
                               const std::vector<double>& azimuths,
                               const std::vector<double>& frequencies);

void write_binaural(const std::string& path, const BinauralSet& set);
BinauralSet read_binaural(const std::string& path);

/// Interaural level difference per (position, azimuth):
/// 10 log10 (sum_w |b_L|^2 / sum_w |b_R|^2) with b = sum_l d_l h_l.
/// The binaural frequency grid must match d_seq to 1e-9 relative.
Eigen::MatrixXd ild(const BinauralSet& binaural,
                    const std::vector<DrivingSignal>& d_seq);

/// Per-position normalized error sum_az |syn - ref| / sum_az |ref|.
Eigen::VectorXd ild_normalized_error(const Eigen::MatrixXd& syn,
                                     const Eigen::MatrixXd& ref);

}  // namespace sfs

#endif  // SFS_METRICS_HPP
