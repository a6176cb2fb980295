#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "sfs/errors.hpp"
#include "sfs/signal_io.hpp"
#include "sfs/wav.hpp"
#include "support/oracles.hpp"

using namespace sfs;

namespace {

std::vector<DrivingSignal> random_signals(unsigned seed, int F, int L) {
    std::mt19937 rng(seed);
    std::vector<DrivingSignal> out(F);
    for (int f = 0; f < F; ++f) {
        out[f].frequency_hz = 100.0 * (f + 1) + 0.125;
        out[f].values = oracles::random_complex_vector(L, rng);
    }
    return out;
}

struct TempFile {
    explicit TempFile(std::string name) : path(std::move(name)) {}
    ~TempFile() { std::remove(path.c_str()); }
    std::string path;
};

}  // namespace

TEST_CASE("driving signals round trip exactly through CSV") {
    const auto signals = random_signals(1, 5, 3);
    TempFile file("signals_roundtrip.csv");
    write_signals(file.path, signals);
    const auto back = read_signals(file.path);
    REQUIRE(back.size() == signals.size());
    for (std::size_t f = 0; f < signals.size(); ++f) {
        CHECK(back[f].frequency_hz == signals[f].frequency_hz);
        CHECK(back[f].values == signals[f].values);
    }
}

TEST_CASE("driving signals round trip exactly through the binary format") {
    const auto signals = random_signals(2, 4, 6);
    TempFile file("signals_roundtrip.dsb");
    write_signals(file.path, signals);
    const auto back = read_signals(file.path);
    REQUIRE(back.size() == signals.size());
    for (std::size_t f = 0; f < signals.size(); ++f) {
        CHECK(back[f].frequency_hz == signals[f].frequency_hz);
        CHECK(back[f].values == signals[f].values);
    }
}

TEST_CASE("binary signal layout starts with the documented header") {
    const auto signals = random_signals(3, 2, 2);
    TempFile file("signals_header.dsb");
    write_signals_binary(file.path, signals);

    std::ifstream in(file.path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "SFSDSIG1");
    std::uint32_t l = 0, f = 0;
    in.read(reinterpret_cast<char*>(&l), 4);
    in.read(reinterpret_cast<char*>(&f), 4);
    CHECK(l == 2);
    CHECK(f == 2);
    double freq0 = 0.0;
    in.read(reinterpret_cast<char*>(&freq0), 8);
    CHECK(freq0 == signals[0].frequency_hz);
}

TEST_CASE("corrupt signal files are rejected") {
    TempFile file("signals_bad.dsb");
    std::ofstream(file.path, std::ios::binary) << "not a signal file";
    CHECK_THROWS_AS(read_signals(file.path), ParseError);

    TempFile csv("signals_bad.csv");
    std::ofstream(csv.path) << "frequency_hz,loudspeaker,re,im\n1000,0,nope,0\n";
    CHECK_THROWS_AS(read_signals(csv.path), ParseError);
    CHECK_THROWS_AS(read_signals("missing_file.dsb"), IoError);
}

TEST_CASE("wav float32 round trips multichannel data") {
    WavData data;
    data.sample_rate = 32000;
    data.samples.resize(64, 3);
    std::mt19937 rng(9);
    std::normal_distribution<double> gauss(0.0, 0.3);
    for (Eigen::Index t = 0; t < 64; ++t)
        for (Eigen::Index c = 0; c < 3; ++c)
            data.samples(t, c) = static_cast<float>(gauss(rng));

    TempFile file("roundtrip.wav");
    write_wav_float32(file.path, data);
    const WavData back = read_wav(file.path);
    CHECK(back.sample_rate == 32000);
    REQUIRE(back.samples.rows() == 64);
    REQUIRE(back.samples.cols() == 3);
    CHECK((back.samples - data.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("wav reader rejects malformed files") {
    TempFile file("bad.wav");
    std::ofstream(file.path, std::ios::binary) << "RIFFxxxxJUNK";
    CHECK_THROWS_AS(read_wav(file.path), ParseError);
    CHECK_THROWS_AS(read_wav("missing.wav"), IoError);
}

TEST_CASE("fnv1a64 is stable and full-precision formatting round trips") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == fnv1a64("a"));
    CHECK(fnv1a64("a") != fnv1a64("b"));
    CHECK(hex64(0) == "0000000000000000");

    for (double v : {1.0 / 3.0, 1e-300, -2.5e17, 0.1}) {
        const std::string s = format_full(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("scene hash is deterministic and input-sensitive") {
    const Scene scene = build_paper_scene();
    CHECK(scene_hash(scene) == scene_hash(scene));
    Scene other = scene;
    other.desired.gain = 2.0;
    CHECK(scene_hash(scene) != scene_hash(other));
}
