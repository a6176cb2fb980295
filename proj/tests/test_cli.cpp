// End-to-end tests running the sfs binary (path injected by CMake).
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "sfs/metrics.hpp"
#include "sfs/scene.hpp"
#include "sfs/signal_io.hpp"
#include "sfs/wav.hpp"
#include "support/oracles.hpp"

using namespace sfs;
using json = nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(SFS_CLI_PATH) + " " + args + " 2> cli_stderr.log";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Small scene so CLI runs stay fast: 8 speakers, 16 control points.
void write_small_scene(const std::string& path) {
    Scene scene;
    scene.loudspeakers = ring_square(2.0, 4, {0.1, -0.1});
    scene.control_points = grid_points({0, 0, 0}, {0.5, 0.5, 0.0}, 4, 4, 1);
    scene.eval_points = grid_points({0, 0, 0}, {0.5, 0.5, 0.0}, 3, 3, 1);
    scene.desired = {DesiredField::Kind::PointSource, {2.0, 0.0, 0.0}, 1.0};
    validate_scene(scene);
    std::ofstream(path) << serialize_scene(scene);
}

}  // namespace

TEST_CASE("make-scene --paper emits a parseable reference scene") {
    REQUIRE(run("make-scene --paper --out cli_paper.json") == 0);
    const Scene scene = parse_scene(slurp("cli_paper.json"));
    CHECK(scene.num_loudspeakers() == 32);
    CHECK(scene.num_control_points() == 1152);
    CHECK(scene == build_paper_scene());
}

TEST_CASE("solve smoke run writes signals, diagnostics and a manifest") {
    write_small_scene("cli_small.json");
    REQUIRE(run("solve cli_small.json --freq 500 --method pm --out cli_pm.csv") == 0);

    const auto signals = read_signals("cli_pm.csv");
    REQUIRE(signals.size() == 1);
    CHECK(signals[0].frequency_hz == 500.0);
    CHECK(signals[0].values.size() == 8);

    const json diag = json::parse(slurp("cli_pm.csv.diag.json"));
    CHECK(diag.size() == 1);
    CHECK(diag[0]["converged"].get<bool>());

    const json manifest = json::parse(slurp("cli_pm.csv.manifest.json"));
    CHECK(manifest["scene_hash"].is_string());
    CHECK(manifest["outputs"].size() == 2);
}

TEST_CASE("solve flag contract violations exit with code 1") {
    write_small_scene("cli_small.json");
    CHECK(run("solve cli_small.json --freq 500 --method pm --gamma-ft 100") == 1);
    CHECK(run("solve cli_small.json --method pm") == 1);
    CHECK(run("solve cli_small.json --freq 500 --freq-range 100:200:2 --method pm") == 1);
    CHECK(run("solve cli_small.json --freq 500 --method bogus") == 1);
    CHECK(run("solve missing_scene.json --freq 500 --method pm") == 1);
    CHECK(run("bogus-subcommand") == 1);
}

TEST_CASE("solve exits 2 when the iteration cap is hit") {
    write_small_scene("cli_small.json");
    CHECK(run("solve cli_small.json --freq 3000 --method am --max-iters 2 "
              "--tol-primal 1e-14 --tol-change 1e-15 --out cli_unconverged.dsb") == 2);
}

TEST_CASE("combined sweep produces one signal per requested frequency") {
    write_small_scene("cli_small.json");
    // high-gamma bins may stop on the iteration cap (exit 2); the outputs
    // must be written either way
    const int code = run("solve cli_small.json --freq-range 100:4000:8 "
                         "--method combined --gamma-ft 2000 --gamma-sigma 0.01 "
                         "--out cli_sweep.dsb");
    REQUIRE((code == 0 || code == 2));
    const auto signals = read_signals("cli_sweep.dsb");
    REQUIRE(signals.size() == 8);
    for (std::size_t i = 1; i < signals.size(); ++i)
        CHECK(signals[i].frequency_hz > signals[i - 1].frequency_hz);
}

TEST_CASE("identical solve runs are bit-identical including the manifest hash") {
    write_small_scene("cli_small.json");
    const std::string flags =
        "solve cli_small.json --freq-range 200:2000:4 --method combined "
        "--out cli_det.csv";
    REQUIRE(run(flags) == 0);
    const std::string first_csv = slurp("cli_det.csv");
    const json first_manifest = json::parse(slurp("cli_det.csv.manifest.json"));

    REQUIRE(run(flags) == 0);
    CHECK(slurp("cli_det.csv") == first_csv);
    const json second_manifest = json::parse(slurp("cli_det.csv.manifest.json"));
    CHECK(first_manifest["manifest_hash"] == second_manifest["manifest_hash"]);
}

TEST_CASE("cold parallel solves match the sequential cold path") {
    write_small_scene("cli_small.json");
    const std::string base =
        std::string(" solve cli_small.json --freq-range 200:2000:6 --method am"
                    " --cold --out ");
    auto run_env = [&](const std::string& env, const std::string& out) {
        const std::string cmd =
            env + " " + SFS_CLI_PATH + base + out + " 2> cli_stderr.log";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    REQUIRE(run_env("SFS_THREADS=4", "cli_cold_par.csv") == 0);
    REQUIRE(run_env("SFS_THREADS=1", "cli_cold_seq.csv") == 0);
    CHECK(slurp("cli_cold_par.csv") == slurp("cli_cold_seq.csv"));
}

TEST_CASE("design-filters writes a multichannel bank with sidecar metadata") {
    write_small_scene("cli_small.json");
    REQUIRE(run("design-filters cli_small.json --fft-size 64 --sample-rate 6400 "
                "--alpha 0 --freq-range 100:400:4 --max-iters 60 "
                "--out cli_bank.wav --signals-out cli_bank_spectra.dsb") == 0);

    const WavData bank = read_wav("cli_bank.wav");
    CHECK(bank.sample_rate == 6400);
    CHECK(bank.samples.rows() == 64);
    CHECK(bank.samples.cols() == 8);

    const json meta = json::parse(slurp("cli_bank.wav.meta.json"));
    CHECK(meta["fft_size"] == 64);
    CHECK(meta["modeling_delay_samples"] == 32);
    CHECK(meta["num_bins"] == 4);
    CHECK(meta["channels"] == 8);

    CHECK(run("design-filters cli_small.json --fft-size 63 --sample-rate 6400") == 1);
    CHECK(run("design-filters cli_small.json --fft-size 64 --sample-rate 6400 "
              "--freq-range 150:450:4") == 1);
}

TEST_CASE("alpha = 0 filter spectra match per-bin solve outputs") {
    // beta pinned on both paths: the filter designer shares one beta across
    // bins (joint objective) while solve defaults to a per-frequency rule
    write_small_scene("cli_small.json");
    REQUIRE(run("design-filters cli_small.json --fft-size 64 --sample-rate 6400 "
                "--alpha 0 --freq-range 100:400:4 --beta 0.001 --max-iters 80 "
                "--tol-primal 1e-9 "
                "--out cli_rt.wav --signals-out cli_rt_spectra.dsb") == 0);
    REQUIRE(run("solve cli_small.json --freq-range 100:400:4 --method combined "
                "--cold --beta 0.001 --max-iters 80 --tol-primal 1e-9 "
                "--tol-change 1e-300 --out cli_rt_solve.dsb") == 0);

    const auto design = read_signals("cli_rt_spectra.dsb");
    const auto solve = read_signals("cli_rt_solve.dsb");
    REQUIRE(design.size() == solve.size());
    for (std::size_t f = 0; f < design.size(); ++f) {
        CHECK(design[f].frequency_hz == doctest::Approx(solve[f].frequency_hz));
        CHECK((design[f].values - solve[f].values).norm() <=
              1e-6 * solve[f].values.norm());
    }
}

TEST_CASE("render convolves: impulse reproduces the bank, zero stays zero") {
    write_small_scene("cli_small.json");
    REQUIRE(run("design-filters cli_small.json --fft-size 64 --sample-rate 6400 "
                "--freq-range 100:400:4 --max-iters 40 --out cli_rbank.wav") == 0);
    const WavData bank = read_wav("cli_rbank.wav");

    WavData impulse;
    impulse.sample_rate = 6400;
    impulse.samples = Eigen::MatrixXd::Zero(8, 1);
    impulse.samples(0, 0) = 1.0;
    write_wav_float32("cli_impulse.wav", impulse);

    REQUIRE(run("render cli_rbank.wav cli_impulse.wav --out cli_rendered.wav") == 0);
    const WavData rendered = read_wav("cli_rendered.wav");
    REQUIRE(rendered.samples.rows() == 8 + 64 - 1);
    REQUIRE(rendered.samples.cols() == 8);
    CHECK((rendered.samples.topRows(64) - bank.samples).cwiseAbs().maxCoeff() <= 1e-7);

    WavData zero = impulse;
    zero.samples.setZero();
    write_wav_float32("cli_zero.wav", zero);
    REQUIRE(run("render cli_rbank.wav cli_zero.wav --out cli_rendered0.wav") == 0);
    CHECK(read_wav("cli_rendered0.wav").samples.norm() == 0.0);

    WavData wrong_rate = impulse;
    wrong_rate.sample_rate = 8000;
    write_wav_float32("cli_wrong_rate.wav", wrong_rate);
    CHECK(run("render cli_rbank.wav cli_wrong_rate.wav --out cli_bad.wav") == 1);
}

TEST_CASE("rendering a bin-frequency sine reaches the solved per-channel gain") {
    write_small_scene("cli_small.json");
    REQUIRE(run("design-filters cli_small.json --fft-size 64 --sample-rate 6400 "
                "--freq-range 100:400:4 --max-iters 120 --tol-primal 1e-10 "
                "--out cli_sbank.wav --signals-out cli_sbank_spectra.dsb") == 0);
    const auto spectra = read_signals("cli_sbank_spectra.dsb");

    // bin 3 sine (300 Hz at 6400 Hz / 64 taps)
    const int k = 3, fft = 64;
    const int periods = 24;
    const int n = periods * fft / k;  // integer periods
    WavData sine;
    sine.sample_rate = 6400;
    sine.samples.resize(n, 1);
    for (int t = 0; t < n; ++t)
        sine.samples(t, 0) = std::sin(2.0 * std::numbers::pi * k * t / fft);
    write_wav_float32("cli_sine.wav", sine);

    REQUIRE(run("render cli_sbank.wav cli_sine.wav --out cli_sine_out.wav") == 0);
    const WavData rendered = read_wav("cli_sine_out.wav");

    // steady-state window: an exact number of periods after the transient
    const int start = fft;
    const int window = (n - 2 * fft) / (fft / k) * (fft / k);
    for (Eigen::Index c = 0; c < rendered.samples.cols(); ++c) {
        Complex acc = 0.0;
        for (int t = 0; t < window; ++t)
            acc += rendered.samples(start + t, c) *
                   std::polar(1.0, -2.0 * std::numbers::pi * k * (start + t) / fft);
        const double amplitude = 2.0 * std::abs(acc) / window;
        const double expected = std::abs(spectra[k - 1].values(c));
        CHECK(amplitude == doctest::Approx(expected).epsilon(0.01));
    }
}

TEST_CASE("evaluate emits metric tables and enforces the binaural contract") {
    write_small_scene("cli_small.json");
    REQUIRE(run("solve cli_small.json --freq-range 500:1000:2 --method pm "
                "--out cli_eval_sig.csv") == 0);

    REQUIRE(run("evaluate cli_small.json --signals cli_eval_sig.csv "
                "--metrics synthesis-error,amplitude-error,amplitude-response "
                "--out cli_eval") == 0);
    const std::string csv = slurp("cli_eval.csv");
    CHECK(csv.find("metric,method,key1,key2,value") == 0);
    CHECK(csv.find("synthesis-error") != std::string::npos);
    CHECK(csv.find("amplitude-response") != std::string::npos);

    CHECK(run("evaluate cli_small.json --signals cli_eval_sig.csv --metrics ild "
              "--out cli_eval_ild") == 1);
}

TEST_CASE("evaluate compare mode reports flatness for both methods") {
    write_small_scene("cli_small.json");
    REQUIRE(run("evaluate cli_small.json --compare --freq-range 400:3200:6 "
                "--metrics flatness --band 400:3200 --max-iters 60 "
                "--out cli_cmp") == 0);
    const json summary = json::parse(slurp("cli_cmp.json"));
    REQUIRE(summary.contains("flatness_std_db"));
    CHECK(summary["flatness_std_db"].contains("pm"));
    CHECK(summary["flatness_std_db"].contains("combined"));
    CHECK(summary["delta_combined_minus_pm"].contains("flatness_std_db"));

    const std::string csv = slurp("cli_cmp.csv");
    CHECK(csv.find("flatness-std-db,pm") != std::string::npos);
    CHECK(csv.find("flatness-std-db,combined") != std::string::npos);
}

TEST_CASE("evaluate computes ILD metrics from binaural transfer data") {
    write_small_scene("cli_small.json");
    const Scene scene = parse_scene(slurp("cli_small.json"));
    const std::vector<double> freqs = {500.0, 1000.0};

    // loudspeaker-to-ear lattice plus a single-source reference lattice
    const BinauralSet speaker_set = synthetic_binaural(
        scene, {{0, 0, 0}, {0.2, 0.1, 0}}, {0.0, std::numbers::pi / 2}, freqs);
    write_binaural("cli_binaural.bin", speaker_set);

    Scene source_only = scene;
    source_only.loudspeakers = {scene.desired.position};
    const BinauralSet ref_set = synthetic_binaural(
        source_only, {{0, 0, 0}, {0.2, 0.1, 0}}, {0.0, std::numbers::pi / 2}, freqs);
    write_binaural("cli_binaural_ref.bin", ref_set);

    REQUIRE(run("solve cli_small.json --freq-range 500:1000:2 --method pm "
                "--out cli_ild_sig.csv") == 0);
    REQUIRE(run("evaluate cli_small.json --signals cli_ild_sig.csv "
                "--metrics ild,ild-ne --binaural cli_binaural.bin "
                "--binaural-ref cli_binaural_ref.bin --out cli_ild") == 0);

    const std::string csv = slurp("cli_ild.csv");
    CHECK(csv.find("ild,signals") != std::string::npos);
    CHECK(csv.find("ild-ne,signals") != std::string::npos);
}
