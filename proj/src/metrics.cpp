#include "sfs/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sfs/errors.hpp"

namespace sfs {

namespace {

constexpr double kDbFloor = -200.0;

double to_db(double magnitude) {
    if (magnitude <= 0.0) return kDbFloor;
    return std::max(20.0 * std::log10(magnitude), kDbFloor);
}

}  // namespace

double discrete_synthesis_error(const TransferMatrix& G, const Eigen::VectorXcd& d,
                                const Eigen::VectorXcd& u_des) {
    if (d.size() != G.cols() || u_des.size() != G.rows())
        throw DimensionError("discrete_synthesis_error: inconsistent dimensions");
    const double denom = u_des.squaredNorm();
    if (denom == 0.0)
        throw UndefinedMetricError(
            "discrete_synthesis_error: zero desired field, normalization undefined");
    return (G.entries * d - u_des).squaredNorm() / denom;
}

double amplitude_error(const TransferMatrix& G, const Eigen::VectorXcd& d,
                       const Eigen::VectorXcd& u_des) {
    if (d.size() != G.cols() || u_des.size() != G.rows())
        throw DimensionError("amplitude_error: inconsistent dimensions");
    const double denom = u_des.squaredNorm();
    if (denom == 0.0)
        throw UndefinedMetricError(
            "amplitude_error: zero desired field, normalization undefined");
    return ((G.entries * d).cwiseAbs() - u_des.cwiseAbs()).squaredNorm() / denom;
}

AmplitudeResponse amplitude_response_at(const Point3& point, const Scene& scene,
                                        const std::vector<DrivingSignal>& d_seq) {
    AmplitudeResponse resp;
    resp.frequencies.reserve(d_seq.size());
    resp.magnitude_db.reserve(d_seq.size());
    for (const auto& d : d_seq) {
        if (d.values.size() != static_cast<Eigen::Index>(scene.loudspeakers.size()))
            throw DimensionError("amplitude_response_at: signal length != L");
        Complex u = 0.0;
        for (Eigen::Index l = 0; l < d.values.size(); ++l)
            u += d.values(l) *
                 greens_free_field(scene.loudspeakers[static_cast<std::size_t>(l)],
                                   point, d.frequency_hz, scene.speed_of_sound);
        resp.frequencies.push_back(d.frequency_hz);
        resp.magnitude_db.push_back(to_db(std::abs(u)));
    }
    return resp;
}

AmplitudeResponse desired_response_at(const Point3& point, const Scene& scene,
                                      const std::vector<double>& frequencies) {
    AmplitudeResponse resp;
    resp.frequencies = frequencies;
    resp.magnitude_db.reserve(frequencies.size());
    for (double f : frequencies) {
        const Complex u = scene.desired.gain *
                          greens_free_field(scene.desired.position, point, f,
                                            scene.speed_of_sound);
        resp.magnitude_db.push_back(to_db(std::abs(u)));
    }
    return resp;
}

double flatness_std_db(const AmplitudeResponse& resp, const AmplitudeResponse& desired,
                       double f_lo, double f_hi) {
    if (resp.frequencies.size() != desired.frequencies.size())
        throw DimensionError("flatness_std_db: responses use different grids");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < resp.frequencies.size(); ++i) {
        if (std::abs(resp.frequencies[i] - desired.frequencies[i]) >
            1e-9 * std::max(1.0, std::abs(desired.frequencies[i])))
            throw DimensionError("flatness_std_db: responses use different grids");
        if (resp.frequencies[i] >= f_lo && resp.frequencies[i] <= f_hi)
            diffs.push_back(resp.magnitude_db[i] - desired.magnitude_db[i]);
    }
    if (diffs.empty())
        throw ValidationError("flatness_std_db: no frequencies inside the band");

    double mean = 0.0;
    for (double v : diffs) mean += v;
    mean /= static_cast<double>(diffs.size());
    double var = 0.0;
    for (double v : diffs) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(diffs.size()));
}

void BinauralSet::validate() const {
    if (positions.empty() || azimuths.empty() || frequencies.empty() ||
        num_loudspeakers < 1)
        throw ValidationError("binaural set: all dimensions must be nonempty");
    for (std::size_t i = 1; i < frequencies.size(); ++i)
        if (!(frequencies[i] > frequencies[i - 1]))
            throw ValidationError("binaural set: frequencies must be ascending");
    const std::size_t expected = positions.size() * azimuths.size() *
                                 frequencies.size() *
                                 static_cast<std::size_t>(num_loudspeakers);
    if (left.size() != expected || right.size() != expected)
        throw ValidationError("binaural set: data size does not match dimensions");
}

BinauralSet synthetic_binaural(const Scene& scene,
                               const std::vector<Point3>& head_positions,
                               const std::vector<double>& azimuths,
                               const std::vector<double>& frequencies) {
    constexpr double kEarOffset = 0.09;  // m, lateral from head center

    BinauralSet set;
    set.positions = head_positions;
    set.azimuths = azimuths;
    set.frequencies = frequencies;
    set.num_loudspeakers = static_cast<Eigen::Index>(scene.loudspeakers.size());
    const std::size_t total = head_positions.size() * azimuths.size() *
                              frequencies.size() * scene.loudspeakers.size();
    set.left.resize(total);
    set.right.resize(total);

    for (std::size_t p = 0; p < head_positions.size(); ++p) {
        for (std::size_t az = 0; az < azimuths.size(); ++az) {
            // Facing (cos phi, sin phi, 0); the left ear sits to the left of
            // the facing direction.
            const double phi = azimuths[az];
            const Point3 head = head_positions[p];
            const Point3 left_ear{head.x - kEarOffset * std::sin(phi),
                                  head.y + kEarOffset * std::cos(phi), head.z};
            const Point3 right_ear{head.x + kEarOffset * std::sin(phi),
                                   head.y - kEarOffset * std::cos(phi), head.z};
            for (std::size_t fi = 0; fi < frequencies.size(); ++fi) {
                for (std::size_t l = 0; l < scene.loudspeakers.size(); ++l) {
                    const auto idx =
                        set.index(p, az, fi, static_cast<Eigen::Index>(l));
                    set.left[idx] =
                        greens_free_field(scene.loudspeakers[l], left_ear,
                                          frequencies[fi], scene.speed_of_sound);
                    set.right[idx] =
                        greens_free_field(scene.loudspeakers[l], right_ear,
                                          frequencies[fi], scene.speed_of_sound);
                }
            }
        }
    }
    set.validate();
    return set;
}

namespace {

constexpr char kBinauralMagic[8] = {'S', 'F', 'S', 'B', 'I', 'N', '1', '\0'};

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(std::string("binaural file: truncated reading ") + what);
    return value;
}

}  // namespace

void write_binaural(const std::string& path, const BinauralSet& set) {
    set.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    out.write(kBinauralMagic, sizeof(kBinauralMagic));
    write_raw(out, static_cast<std::uint32_t>(set.positions.size()));
    write_raw(out, static_cast<std::uint32_t>(set.azimuths.size()));
    write_raw(out, static_cast<std::uint32_t>(set.frequencies.size()));
    write_raw(out, static_cast<std::uint32_t>(set.num_loudspeakers));
    for (const auto& p : set.positions) {
        write_raw(out, p.x);
        write_raw(out, p.y);
        write_raw(out, p.z);
    }
    for (double a : set.azimuths) write_raw(out, a);
    for (double f : set.frequencies) write_raw(out, f);
    auto write_ears = [&](const std::vector<Complex>& data) {
        for (const Complex& c : data) {
            write_raw(out, c.real());
            write_raw(out, c.imag());
        }
    };
    write_ears(set.left);
    write_ears(set.right);
    if (!out) throw IoError("write failed: " + path);
}

BinauralSet read_binaural(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open binaural file: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBinauralMagic, sizeof(magic)) != 0)
        throw ParseError("binaural file: bad magic in " + path);

    BinauralSet set;
    const auto num_pos = read_raw<std::uint32_t>(in, "position count");
    const auto num_az = read_raw<std::uint32_t>(in, "azimuth count");
    const auto num_freq = read_raw<std::uint32_t>(in, "frequency count");
    set.num_loudspeakers =
        static_cast<Eigen::Index>(read_raw<std::uint32_t>(in, "loudspeaker count"));

    set.positions.resize(num_pos);
    for (auto& p : set.positions) {
        p.x = read_raw<double>(in, "position");
        p.y = read_raw<double>(in, "position");
        p.z = read_raw<double>(in, "position");
    }
    set.azimuths.resize(num_az);
    for (auto& a : set.azimuths) a = read_raw<double>(in, "azimuth");
    set.frequencies.resize(num_freq);
    for (auto& f : set.frequencies) f = read_raw<double>(in, "frequency");

    const std::size_t total = static_cast<std::size_t>(num_pos) * num_az * num_freq *
                              static_cast<std::size_t>(set.num_loudspeakers);
    auto read_ears = [&](std::vector<Complex>& data) {
        data.resize(total);
        for (auto& c : data) {
            const double re = read_raw<double>(in, "ear data");
            const double im = read_raw<double>(in, "ear data");
            c = Complex(re, im);
        }
    };
    read_ears(set.left);
    read_ears(set.right);
    set.validate();
    return set;
}

Eigen::MatrixXd ild(const BinauralSet& binaural,
                    const std::vector<DrivingSignal>& d_seq) {
    binaural.validate();
    if (d_seq.size() != binaural.frequencies.size())
        throw DimensionError("ild: driving signals do not cover the binaural grid");
    for (std::size_t f = 0; f < d_seq.size(); ++f) {
        if (std::abs(d_seq[f].frequency_hz - binaural.frequencies[f]) >
            1e-9 * std::max(1.0, binaural.frequencies[f]))
            throw GridError("ild: frequency mismatch at bin " + std::to_string(f));
        if (d_seq[f].values.size() != binaural.num_loudspeakers)
            throw DimensionError("ild: signal length != loudspeaker count");
    }

    const std::size_t P = binaural.positions.size();
    const std::size_t A = binaural.azimuths.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(A));
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t az = 0; az < A; ++az) {
            double energy_left = 0.0, energy_right = 0.0;
            for (std::size_t f = 0; f < binaural.frequencies.size(); ++f) {
                Complex b_left = 0.0, b_right = 0.0;
                for (Eigen::Index l = 0; l < binaural.num_loudspeakers; ++l) {
                    const auto idx = binaural.index(p, az, f, l);
                    b_left += d_seq[f].values(l) * binaural.left[idx];
                    b_right += d_seq[f].values(l) * binaural.right[idx];
                }
                energy_left += std::norm(b_left);
                energy_right += std::norm(b_right);
            }
            if (energy_right == 0.0)
                throw UndefinedMetricError(
                    "ild: zero right-ear energy at position " + std::to_string(p) +
                    ", azimuth " + std::to_string(az));
            out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(az)) =
                10.0 * std::log10(energy_left / energy_right);
        }
    }
    return out;
}

Eigen::VectorXd ild_normalized_error(const Eigen::MatrixXd& syn,
                                     const Eigen::MatrixXd& ref) {
    if (syn.rows() != ref.rows() || syn.cols() != ref.cols())
        throw DimensionError("ild_normalized_error: shape mismatch");
    Eigen::VectorXd out(syn.rows());
    for (Eigen::Index p = 0; p < syn.rows(); ++p) {
        const double denom = ref.row(p).cwiseAbs().sum();
        if (denom == 0.0)
            throw UndefinedMetricError(
                "ild_normalized_error: zero reference ILD sum at position " +
                std::to_string(p));
        out(p) = (syn.row(p) - ref.row(p)).cwiseAbs().sum() / denom;
    }
    return out;
}

}  // namespace sfs
