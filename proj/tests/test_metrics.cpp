#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "sfs/errors.hpp"
#include "sfs/metrics.hpp"
#include "support/oracles.hpp"

using namespace sfs;
using std::numbers::pi;

namespace {

TransferMatrix matrix_of(const Eigen::MatrixXcd& m, double f = 1000.0) {
    return TransferMatrix(m, f);
}

}  // namespace

TEST_CASE("synthesis error anchors: exact match and silence") {
    std::mt19937 rng(10);
    const Eigen::MatrixXcd g = oracles::random_complex_matrix(5, 3, rng);
    const Eigen::VectorXcd d = oracles::random_complex_vector(3, rng);
    const Eigen::VectorXcd u = g * d;

    CHECK(discrete_synthesis_error(matrix_of(g), d, u) <= 1e-24);
    CHECK(discrete_synthesis_error(matrix_of(g), Eigen::VectorXcd::Zero(3), u) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(
        discrete_synthesis_error(matrix_of(g), d, Eigen::VectorXcd::Zero(5)),
        UndefinedMetricError);
}

TEST_CASE("synthesis and amplitude errors match naive loops") {
    std::mt19937 rng(11);
    const Eigen::MatrixXcd g = oracles::random_complex_matrix(6, 4, rng);
    const Eigen::VectorXcd d = oracles::random_complex_vector(4, rng);
    const Eigen::VectorXcd u = oracles::random_complex_vector(6, rng);

    double num_pm = 0.0, num_am = 0.0, denom = 0.0;
    const Eigen::VectorXcd gd = oracles::naive_matvec(g, d);
    for (int n = 0; n < 6; ++n) {
        num_pm += std::norm(gd(n) - u(n));
        const double da = std::abs(gd(n)) - std::abs(u(n));
        num_am += da * da;
        denom += std::norm(u(n));
    }
    CHECK(discrete_synthesis_error(matrix_of(g), d, u) ==
          doctest::Approx(num_pm / denom).epsilon(1e-12));
    CHECK(amplitude_error(matrix_of(g), d, u) ==
          doctest::Approx(num_am / denom).epsilon(1e-12));
}

TEST_CASE("amplitude error ignores a constant phase rotation") {
    std::mt19937 rng(12);
    const Eigen::MatrixXcd g = oracles::random_complex_matrix(4, 2, rng);
    const Eigen::VectorXcd d = oracles::random_complex_vector(2, rng);
    const Eigen::VectorXcd u = (g * d) * std::polar(1.0, 1.234);
    CHECK(amplitude_error(matrix_of(g), d, u) <= 1e-24);
    CHECK(amplitude_error(matrix_of(g), Eigen::VectorXcd::Zero(2), u) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("amplitude error never exceeds synthesis error (reverse triangle)") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 5, l = 1 + trial % 3;
        const Eigen::MatrixXcd g = oracles::random_complex_matrix(n, l, rng);
        const Eigen::VectorXcd d = oracles::random_complex_vector(l, rng);
        const Eigen::VectorXcd u = oracles::random_complex_vector(n, rng);
        const double se = discrete_synthesis_error(matrix_of(g), d, u);
        const double ae = amplitude_error(matrix_of(g), d, u);
        CHECK(ae <= se * (1.0 + 1e-12) + 1e-15);
    }
}

TEST_CASE("amplitude response recovers the desired point source") {
    const Scene scene = build_paper_scene();
    const Point3 center{0.0, 0.0, 0.0};
    const std::vector<double> freqs = {250.0, 500.0, 1000.0};
    const AmplitudeResponse desired = desired_response_at(center, scene, freqs);
    // point source 2 m away: flat 1/(8 pi)
    for (double db : desired.magnitude_db)
        CHECK(db == doctest::Approx(20.0 * std::log10(1.0 / (8.0 * pi))).epsilon(1e-12));

    // a synthesized response from a "perfect" single speaker at the source
    Scene direct = scene;
    direct.loudspeakers = {{2.0, 0.0, 0.0}};
    std::vector<DrivingSignal> d_seq;
    for (double f : freqs) {
        DrivingSignal d;
        d.frequency_hz = f;
        d.values = Eigen::VectorXcd::Ones(1);
        d_seq.push_back(d);
    }
    const AmplitudeResponse resp = amplitude_response_at(center, direct, d_seq);
    for (std::size_t i = 0; i < freqs.size(); ++i)
        CHECK(resp.magnitude_db[i] ==
              doctest::Approx(desired.magnitude_db[i]).epsilon(1e-12));
}

TEST_CASE("silent driving signals clamp to the -200 dB floor") {
    const Scene scene = build_paper_scene();
    std::vector<DrivingSignal> d_seq(3);
    for (int i = 0; i < 3; ++i) {
        d_seq[i].frequency_hz = 100.0 * (i + 1);
        d_seq[i].values = Eigen::VectorXcd::Zero(32);
    }
    const AmplitudeResponse resp = amplitude_response_at({0, 0, 0}, scene, d_seq);
    for (double db : resp.magnitude_db) CHECK(db == -200.0);
}

TEST_CASE("flatness standard deviation anchors") {
    AmplitudeResponse a, b;
    for (int i = 0; i < 8; ++i) {
        a.frequencies.push_back(1000.0 + i * 100.0);
        b.frequencies.push_back(1000.0 + i * 100.0);
        a.magnitude_db.push_back(-20.0);
        b.magnitude_db.push_back(-20.0);
    }
    CHECK(flatness_std_db(a, b, 900.0, 2000.0) == 0.0);

    // constant offset has zero deviation
    for (auto& v : a.magnitude_db) v += 6.0;
    CHECK(flatness_std_db(a, b, 900.0, 2000.0) == 0.0);

    // symmetric +-3 dB square ripple has std exactly 3
    for (int i = 0; i < 8; ++i) a.magnitude_db[i] = -20.0 + ((i % 2 == 0) ? 3.0 : -3.0);
    CHECK(flatness_std_db(a, b, 900.0, 2000.0) == doctest::Approx(3.0).epsilon(1e-12));

    CHECK_THROWS_AS(flatness_std_db(a, b, 5000.0, 6000.0), ValidationError);
}

namespace {

BinauralSet tiny_binaural(const Scene& scene) {
    return synthetic_binaural(scene, {{0, 0, 0}, {0.25, 0.25, 0}},
                              {0.0, pi / 4, pi / 2}, {500.0, 1000.0});
}

std::vector<DrivingSignal> tiny_signals(unsigned seed, Eigen::Index L,
                                        const std::vector<double>& freqs) {
    std::mt19937 rng(seed);
    std::vector<DrivingSignal> out;
    for (double f : freqs) {
        DrivingSignal d;
        d.frequency_hz = f;
        d.values = oracles::random_complex_vector(L, rng);
        out.push_back(d);
    }
    return out;
}

}  // namespace

TEST_CASE("identical ear data gives 0 dB ILD everywhere") {
    const Scene scene = build_paper_scene();
    BinauralSet set = tiny_binaural(scene);
    set.right = set.left;
    const auto signals = tiny_signals(1, 32, set.frequencies);
    const Eigen::MatrixXd result = ild(set, signals);
    CHECK(result.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("doubling left-ear pressure adds 6.02 dB") {
    const Scene scene = build_paper_scene();
    BinauralSet set = tiny_binaural(scene);
    set.right = set.left;
    for (auto& c : set.left) c *= 2.0;
    const auto signals = tiny_signals(2, 32, set.frequencies);
    const Eigen::MatrixXd result = ild(set, signals);
    for (Eigen::Index p = 0; p < result.rows(); ++p)
        for (Eigen::Index a = 0; a < result.cols(); ++a)
            CHECK(result(p, a) == doctest::Approx(6.0206).epsilon(1e-3));
}

TEST_CASE("ild matches a hand-computed two-speaker two-bin dataset") {
    BinauralSet set;
    set.positions = {{0, 0, 0}};
    set.azimuths = {0.0};
    set.frequencies = {100.0, 200.0};
    set.num_loudspeakers = 2;
    // [pos][az][freq][spk]
    set.left = {Complex(1, 0), Complex(0, 1), Complex(0.5, 0), Complex(0, -0.5)};
    set.right = {Complex(0.5, 0.5), Complex(1, 0), Complex(0, 0.25), Complex(0.25, 0)};

    std::vector<DrivingSignal> d(2);
    d[0].frequency_hz = 100.0;
    d[0].values = Eigen::VectorXcd(2);
    d[0].values << Complex(1, 0), Complex(0, 1);
    d[1].frequency_hz = 200.0;
    d[1].values = Eigen::VectorXcd(2);
    d[1].values << Complex(0, 2), Complex(1, 1);

    // hand computation
    const Complex bl1 = d[0].values(0) * set.left[0] + d[0].values(1) * set.left[1];
    const Complex bl2 = d[1].values(0) * set.left[2] + d[1].values(1) * set.left[3];
    const Complex br1 = d[0].values(0) * set.right[0] + d[0].values(1) * set.right[1];
    const Complex br2 = d[1].values(0) * set.right[2] + d[1].values(1) * set.right[3];
    const double expected = 10.0 * std::log10((std::norm(bl1) + std::norm(bl2)) /
                                              (std::norm(br1) + std::norm(br2)));
    const Eigen::MatrixXd result = ild(set, d);
    CHECK(result(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ild is invariant to a global phase on the driving signals") {
    const Scene scene = build_paper_scene();
    const BinauralSet set = tiny_binaural(scene);
    auto signals = tiny_signals(3, 32, set.frequencies);
    const Eigen::MatrixXd base = ild(set, signals);
    for (auto& sig : signals) sig.values *= std::polar(1.0, 0.777);
    const Eigen::MatrixXd rotated = ild(set, signals);
    CHECK((base - rotated).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ild rejects misaligned grids and zero right-ear energy") {
    const Scene scene = build_paper_scene();
    const BinauralSet set = tiny_binaural(scene);
    auto signals = tiny_signals(4, 32, set.frequencies);
    signals[0].frequency_hz += 1.0;
    CHECK_THROWS_AS(ild(set, signals), GridError);

    BinauralSet silent = set;
    for (auto& c : silent.right) c = 0.0;
    const auto good = tiny_signals(4, 32, set.frequencies);
    CHECK_THROWS_AS(ild(silent, good), UndefinedMetricError);
}

TEST_CASE("normalized ILD error anchors and oracle") {
    std::mt19937 rng(17);
    Eigen::MatrixXd ref(3, 4), syn(3, 4);
    for (int p = 0; p < 3; ++p)
        for (int a = 0; a < 4; ++a) {
            ref(p, a) = std::normal_distribution<double>(0.0, 5.0)(rng);
            syn(p, a) = std::normal_distribution<double>(0.0, 5.0)(rng);
        }

    const Eigen::VectorXd zero_err = ild_normalized_error(ref, ref);
    CHECK(zero_err.cwiseAbs().maxCoeff() == 0.0);

    const Eigen::VectorXd full_err =
        ild_normalized_error(Eigen::MatrixXd::Zero(3, 4), ref);
    for (int p = 0; p < 3; ++p) CHECK(full_err(p) == doctest::Approx(1.0).epsilon(1e-15));

    const Eigen::VectorXd err = ild_normalized_error(syn, ref);
    for (int p = 0; p < 3; ++p) {
        double num = 0.0, den = 0.0;
        for (int a = 0; a < 4; ++a) {
            num += std::abs(syn(p, a) - ref(p, a));
            den += std::abs(ref(p, a));
        }
        CHECK(err(p) == doctest::Approx(num / den).epsilon(1e-12));
    }

    CHECK_THROWS_AS(ild_normalized_error(syn, Eigen::MatrixXd::Zero(3, 4)),
                    UndefinedMetricError);
    CHECK_THROWS_AS(ild_normalized_error(syn.topRows(2), ref), DimensionError);
}

TEST_CASE("binaural files round trip through the binary format") {
    const Scene scene = build_paper_scene();
    const BinauralSet set = tiny_binaural(scene);
    const std::string path = "binaural_roundtrip.sfsbin";
    write_binaural(path, set);
    const BinauralSet back = read_binaural(path);
    std::remove(path.c_str());

    CHECK(back.positions.size() == set.positions.size());
    CHECK(back.azimuths == set.azimuths);
    CHECK(back.frequencies == set.frequencies);
    CHECK(back.num_loudspeakers == set.num_loudspeakers);
    CHECK(back.left == set.left);
    CHECK(back.right == set.right);
}
