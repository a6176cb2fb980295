#include "sfs/acoustics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sfs/errors.hpp"

namespace sfs {

Complex greens_free_field(const Point3& src, const Point3& rcv, double frequency_hz,
                          double speed_of_sound) {
    const double r = distance(src, rcv);
    if (r <= 1e-9)
        throw SingularityError("greens_free_field: source and receiver coincide (r = " +
                               std::to_string(r) + " m)");
    const double k = 2.0 * std::numbers::pi * frequency_hz / speed_of_sound;
    const double amp = 1.0 / (4.0 * std::numbers::pi * r);
    return std::polar(amp, -k * r);
}

TransferMatrix::TransferMatrix(const TransferMatrix& other)
    : entries(other.entries), frequency_hz(other.frequency_hz) {
    std::scoped_lock lock(other.gram_mutex_);
    gram_ = other.gram_;
}

TransferMatrix& TransferMatrix::operator=(const TransferMatrix& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(gram_mutex_, other.gram_mutex_);
    entries = other.entries;
    frequency_hz = other.frequency_hz;
    gram_ = other.gram_;
    return *this;
}

const Eigen::MatrixXcd& TransferMatrix::gram() const {
    std::scoped_lock lock(gram_mutex_);
    if (!gram_) gram_ = entries.adjoint() * entries;
    return *gram_;
}

TransferMatrix build_transfer_matrix(const Scene& scene, double frequency_hz,
                                     Grid target) {
    const auto& points =
        target == Grid::ControlPoints ? scene.control_points : scene.eval_points;
    if (points.empty())
        throw ValidationError("build_transfer_matrix: target grid is empty");

    const auto n = static_cast<Eigen::Index>(points.size());
    const auto l = static_cast<Eigen::Index>(scene.loudspeakers.size());
    Eigen::MatrixXcd entries(n, l);
    for (Eigen::Index col = 0; col < l; ++col) {
        for (Eigen::Index row = 0; row < n; ++row) {
            try {
                entries(row, col) = greens_free_field(scene.loudspeakers[col],
                                                      points[row], frequency_hz,
                                                      scene.speed_of_sound);
            } catch (const SingularityError&) {
                throw SingularityError(
                    "build_transfer_matrix: loudspeaker[" + std::to_string(col) +
                    "] coincides with grid point[" + std::to_string(row) + "]");
            }
        }
    }
    return TransferMatrix(std::move(entries), frequency_hz);
}

PressureVector desired_pressure(const Scene& scene, double frequency_hz, Grid target) {
    const auto& points =
        target == Grid::ControlPoints ? scene.control_points : scene.eval_points;
    if (points.empty())
        throw ValidationError("desired_pressure: target grid is empty");

    Eigen::VectorXcd values(static_cast<Eigen::Index>(points.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        values(i) = scene.desired.gain *
                    greens_free_field(scene.desired.position,
                                      points[static_cast<std::size_t>(i)], frequency_hz,
                                      scene.speed_of_sound);
    }
    return PressureVector{std::move(values), frequency_hz};
}

PressureVector synthesize_field(const TransferMatrix& G, const Eigen::VectorXcd& d) {
    if (d.size() != G.cols())
        throw DimensionError("synthesize_field: d has " + std::to_string(d.size()) +
                             " entries, G has " + std::to_string(G.cols()) + " columns");
    return PressureVector{G.entries * d, G.frequency_hz};
}

}  // namespace sfs
