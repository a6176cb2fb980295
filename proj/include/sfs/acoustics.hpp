#ifndef SFS_ACOUSTICS_HPP
#define SFS_ACOUSTICS_HPP

#include <complex>
#include <mutex>
#include <optional>

#include <Eigen/Dense>

#include "sfs/scene.hpp"

namespace sfs {

using Complex = std::complex<double>;

/// Which point grid of a Scene an operation targets.
enum class Grid { ControlPoints, EvalPoints };

/// Free-field point-source transfer function exp(-j k r) / (4 pi r) with
/// k = 2 pi f / c. Time convention is e^{+j omega t}, so propagation delay
/// shows up as negative phase.
Complex greens_free_field(const Point3& src, const Point3& rcv, double frequency_hz,
                          double speed_of_sound);

/// Transfer functions from every loudspeaker (column) to every grid point
/// (row) at one frequency. The L x L Gram matrix G^H G is computed lazily
/// and cached; concurrent first calls are serialized.
class TransferMatrix {
public:
    TransferMatrix() = default;
    TransferMatrix(Eigen::MatrixXcd entries, double frequency_hz)
        : entries(std::move(entries)), frequency_hz(frequency_hz) {}

    TransferMatrix(const TransferMatrix& other);
    TransferMatrix& operator=(const TransferMatrix& other);
    TransferMatrix(TransferMatrix&&) = default;
    TransferMatrix& operator=(TransferMatrix&&) = default;

    Eigen::MatrixXcd entries;  // N x L
    double frequency_hz = 0.0;

    Eigen::Index rows() const { return entries.rows(); }
    Eigen::Index cols() const { return entries.cols(); }

    /// G^H G, Hermitian L x L; cached after the first call.
    const Eigen::MatrixXcd& gram() const;

private:
    mutable std::mutex gram_mutex_;
    mutable std::optional<Eigen::MatrixXcd> gram_;
};

/// Complex pressures sampled on a point grid at one frequency.
struct PressureVector {
    Eigen::VectorXcd values;
    double frequency_hz = 0.0;
};

TransferMatrix build_transfer_matrix(const Scene& scene, double frequency_hz,
                                     Grid target);

/// Desired pressures on the selected grid: gain * greens(source, point).
PressureVector desired_pressure(const Scene& scene, double frequency_hz, Grid target);

/// u = G d. Throws DimensionError when d does not match the columns of G.
PressureVector synthesize_field(const TransferMatrix& G, const Eigen::VectorXcd& d);

}  // namespace sfs

#endif  // SFS_ACOUSTICS_HPP
