// Command-line front end: scene generation, driving-signal solves, broadband
// FIR design, field evaluation and offline rendering.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sfs/broadband.hpp"
#include "sfs/errors.hpp"
#include "sfs/metrics.hpp"
#include "sfs/scene.hpp"
#include "sfs/signal_io.hpp"
#include "sfs/solvers.hpp"
#include "sfs/wav.hpp"

namespace {

using json = nlohmann::json;
using namespace sfs;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int thread_count() {
    if (const char* env = std::getenv("SFS_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count) across the configured thread count.
// Work is indexed, so output ordering never depends on scheduling.
void parallel_for(int count, const std::function<void(int)>& fn) {
    const int threads = std::min(thread_count(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::scoped_lock lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::vector<double> parse_freq_range(const std::string& text) {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &lo, &hi, &count, &tail) != 3)
        throw UsageError("--freq-range expects lo:hi:count, got '" + text + "'");
    if (count < 1 || lo <= 0.0 || hi < lo)
        throw UsageError("--freq-range needs 0 < lo <= hi and count >= 1");
    std::vector<double> freqs;
    if (count == 1) {
        freqs.push_back(lo);
    } else {
        for (int i = 0; i < count; ++i)
            freqs.push_back(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
    }
    return freqs;
}

// Solver options shared by `solve`, `design-filters` and `evaluate
// --compare`. Values resolve as flags > scene-file `solver` section >
// built-ins.
struct SolverFlags {
    std::optional<double> beta;
    std::optional<double> rho;
    std::optional<double> gamma_ft_hz;
    std::optional<double> gamma_sigma;
    std::optional<int> max_iters;
    std::optional<double> tol_primal;
    std::optional<double> tol_change;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--beta", beta, "Regularization weight (default: spectral rule)");
        cmd->add_option("--rho", rho, "ADMM penalty parameter (default 1.0)");
        cmd->add_option("--gamma-ft", gamma_ft_hz,
                        "Sigmoid transition frequency in Hz (default 2000)");
        cmd->add_option("--gamma-sigma", gamma_sigma,
                        "Sigmoid slope parameter (default 0.01)");
        cmd->add_option("--max-iters", max_iters, "ADMM iteration cap (default 200)");
        cmd->add_option("--tol-primal", tol_primal,
                        "Primal residual tolerance (default 1e-8)");
        cmd->add_option("--tol-change", tol_change,
                        "Relative d-change tolerance (default 1e-10)");
    }
};

// Optional `solver` section of a scene file; unknown keys are rejected by
// the schema, known keys provide per-scene defaults.
struct SceneSolverDefaults {
    std::optional<double> beta, rho, gamma_ft_hz, gamma_sigma, tol_primal, tol_change;
    std::optional<int> max_iters;
};

SceneSolverDefaults read_scene_solver_defaults(const std::string& path) {
    SceneSolverDefaults out;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scene file: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
    if (!j.is_object() || !j.contains("solver")) return out;
    const json& s = j.at("solver");
    if (!s.is_object()) throw ParseError("scene config: 'solver' must be an object");
    for (const auto& [key, value] : s.items()) {
        if (key == "beta") out.beta = value.get<double>();
        else if (key == "rho") out.rho = value.get<double>();
        else if (key == "gamma_ft_hz") out.gamma_ft_hz = value.get<double>();
        else if (key == "gamma_sigma") out.gamma_sigma = value.get<double>();
        else if (key == "max_iters") out.max_iters = value.get<int>();
        else if (key == "tol_primal") out.tol_primal = value.get<double>();
        else if (key == "tol_change") out.tol_change = value.get<double>();
        else throw ParseError("scene config: unknown solver key '" + key + "'");
    }
    return out;
}

struct ResolvedSolver {
    SolverConfig config;          // gamma_mode filled per method
    double gamma_ft_hz = 2000.0;
    double gamma_sigma = 0.01;
};

ResolvedSolver resolve_solver(const SolverFlags& flags,
                              const SceneSolverDefaults& defaults) {
    ResolvedSolver out;
    auto pick = [](const auto& flag, const auto& scene_default, auto builtin) {
        if (flag) return *flag;
        if (scene_default) return *scene_default;
        return builtin;
    };
    if (flags.beta)
        out.config.beta = *flags.beta;
    else if (defaults.beta)
        out.config.beta = *defaults.beta;
    out.config.rho = pick(flags.rho, defaults.rho, 1.0);
    out.config.max_iters = pick(flags.max_iters, defaults.max_iters, 200);
    out.config.tol_primal = pick(flags.tol_primal, defaults.tol_primal, 1e-8);
    out.config.tol_change = pick(flags.tol_change, defaults.tol_change, 1e-10);
    out.gamma_ft_hz = pick(flags.gamma_ft_hz, defaults.gamma_ft_hz, 2000.0);
    out.gamma_sigma = pick(flags.gamma_sigma, defaults.gamma_sigma, 0.01);
    return out;
}

json solver_config_json(const SolverConfig& config) {
    json j;
    if (config.beta)
        j["beta"] = *config.beta;
    else
        j["beta"] = "spectral_rule";
    j["rho"] = config.rho;
    if (const auto* fixed = std::get_if<FixedGamma>(&config.gamma_mode)) {
        j["gamma"] = {{"mode", "fixed"}, {"value", fixed->value}};
    } else {
        const auto& sig = std::get<SigmoidGamma>(config.gamma_mode);
        j["gamma"] = {{"mode", "sigmoid"},
                      {"ft_hz", sig.omega_t / (2.0 * std::numbers::pi)},
                      {"sigma", sig.sigma}};
    }
    j["max_iters"] = config.max_iters;
    j["tol_primal"] = config.tol_primal;
    j["tol_change"] = config.tol_change;
    return j;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// The manifest hash covers everything except the timestamp, so identical
// inputs yield identical hashes across runs.
void write_manifest(const std::string& out_path, const std::string& command,
                    const Scene& scene, const json& config,
                    const std::vector<double>& frequencies,
                    const std::vector<std::string>& outputs) {
    json j;
    j["command"] = command;
    j["scene_hash"] = scene_hash(scene);
    j["solver_config"] = config;
    j["frequencies"] = frequencies;
    j["outputs"] = outputs;
    j["manifest_hash"] = hex64(fnv1a64(j.dump()));
    j["timestamp_utc"] = iso_timestamp();
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << j.dump(2) << "\n";
}

void write_diagnostics(const std::string& path,
                       const std::vector<DrivingSignal>& signals) {
    json rows = json::array();
    for (const auto& sig : signals) {
        json row;
        row["frequency_hz"] = sig.frequency_hz;
        row["iterations"] = sig.diagnostics.iterations;
        row["converged"] = sig.diagnostics.converged;
        row["reason"] = sig.diagnostics.reason;
        if (!sig.diagnostics.primal_residual_history.empty())
            row["final_primal_residual"] = sig.diagnostics.primal_residual_history.back();
        if (!sig.diagnostics.cost_history.empty())
            row["final_cost"] = sig.diagnostics.cost_history.back();
        rows.push_back(std::move(row));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << rows.dump(2) << "\n";
}

std::string join_args(int argc, char** argv) {
    std::string joined;
    for (int i = 0; i < argc; ++i) {
        if (i) joined += ' ';
        joined += argv[i];
    }
    return joined;
}

// ---------------------------------------------------------------- solve ---

struct SolveArgs {
    std::string scene_file;
    std::optional<double> freq;
    std::string freq_range;
    std::string method = "combined";
    SolverFlags solver;
    std::string out = "signals.dsb";
    bool cold = false;
};

std::vector<DrivingSignal> run_solves(const Scene& scene,
                                      const std::vector<double>& freqs,
                                      const std::string& method,
                                      const ResolvedSolver& resolved, bool cold) {
    SolverConfig config = resolved.config;
    if (method == "am")
        config.gamma_mode = FixedGamma{1.0};
    else if (method == "combined")
        config.gamma_mode = SigmoidGamma{2.0 * std::numbers::pi * resolved.gamma_ft_hz,
                                         resolved.gamma_sigma};

    std::vector<DrivingSignal> signals(freqs.size());
    if (method == "pm") {
        parallel_for(static_cast<int>(freqs.size()), [&](int i) {
            const TransferMatrix G =
                build_transfer_matrix(scene, freqs[i], Grid::ControlPoints);
            const PressureVector u =
                desired_pressure(scene, freqs[i], Grid::ControlPoints);
            const double beta = config.beta ? *config.beta : default_beta(G);
            signals[i] = solve_pm(G, u, beta);
        });
    } else if (cold) {
        parallel_for(static_cast<int>(freqs.size()), [&](int i) {
            const TransferMatrix G =
                build_transfer_matrix(scene, freqs[i], Grid::ControlPoints);
            const PressureVector u =
                desired_pressure(scene, freqs[i], Grid::ControlPoints);
            signals[i] = solve_combined_admm(G, u, config).first;
        });
    } else {
        signals = warm_start_sweep(scene, freqs, config);
    }
    return signals;
}

int cmd_solve(const SolveArgs& args, const std::string& command) {
    if (args.freq && !args.freq_range.empty())
        throw UsageError("--freq and --freq-range are mutually exclusive");
    if (!args.freq && args.freq_range.empty())
        throw UsageError("one of --freq or --freq-range is required");
    if (args.method != "pm" && args.method != "am" && args.method != "combined")
        throw UsageError("--method must be pm, am or combined");
    if ((args.method == "pm" || args.method == "am") &&
        (args.solver.gamma_ft_hz || args.solver.gamma_sigma))
        throw UsageError("--gamma-ft/--gamma-sigma only apply to --method combined");

    const Scene scene = load_scene(args.scene_file);
    const auto defaults = read_scene_solver_defaults(args.scene_file);
    const ResolvedSolver resolved = resolve_solver(args.solver, defaults);

    std::vector<double> freqs =
        args.freq ? std::vector<double>{*args.freq} : parse_freq_range(args.freq_range);

    const auto signals = run_solves(scene, freqs, args.method, resolved, args.cold);

    write_signals(args.out, signals);
    write_diagnostics(args.out + ".diag.json", signals);

    SolverConfig config_for_manifest = resolved.config;
    if (args.method == "am") config_for_manifest.gamma_mode = FixedGamma{1.0};
    if (args.method == "combined")
        config_for_manifest.gamma_mode = SigmoidGamma{
            2.0 * std::numbers::pi * resolved.gamma_ft_hz, resolved.gamma_sigma};
    json config_json = solver_config_json(config_for_manifest);
    config_json["method"] = args.method;
    write_manifest(args.out + ".manifest.json", command, scene, config_json, freqs,
                   {args.out, args.out + ".diag.json"});

    const bool all_converged =
        std::all_of(signals.begin(), signals.end(),
                    [](const DrivingSignal& s) { return s.diagnostics.converged; });
    if (!all_converged)
        std::cerr << "warning: max iterations reached without convergence\n";
    return all_converged ? kExitOk : kExitNotConverged;
}

// ------------------------------------------------------- design-filters ---

struct DesignArgs {
    std::string scene_file;
    int fft_size = 256;
    double sample_rate = 32000.0;
    double alpha = 0.0;
    std::optional<int> delay;
    int fade = 0;
    std::string freq_range;
    SolverFlags solver;
    std::string out = "filters.wav";
    std::string signals_out;
    int max_iters = 200;
    double tol_primal = 1e-6;
};

int cmd_design_filters(const DesignArgs& args, const std::string& command) {
    if (args.fft_size < 4 || args.fft_size % 2 != 0)
        throw UsageError("--fft-size must be even and >= 4");
    if (args.sample_rate <= 0.0) throw UsageError("--sample-rate must be positive");
    if (args.alpha < 0.0) throw UsageError("--alpha must be >= 0");

    const Scene scene = load_scene(args.scene_file);
    const auto defaults = read_scene_solver_defaults(args.scene_file);
    ResolvedSolver resolved = resolve_solver(args.solver, defaults);
    resolved.config.gamma_mode = SigmoidGamma{
        2.0 * std::numbers::pi * resolved.gamma_ft_hz, resolved.gamma_sigma};

    // Bin selection: contiguous DFT bins; --freq-range must line up with the
    // fft grid. Bins below the range are zero-filled in the filter spectrum.
    const double df = args.sample_rate / args.fft_size;
    int first_bin = 1;
    int num_bins = args.fft_size / 2 - 1;
    if (!args.freq_range.empty()) {
        const std::vector<double> freqs = parse_freq_range(args.freq_range);
        const double spacing =
            freqs.size() > 1 ? freqs[1] - freqs[0] : df;
        if (std::abs(spacing - df) > 1e-9 * df)
            throw UsageError("--freq-range spacing must equal sample_rate/fft_size = " +
                             std::to_string(df));
        const double k_lo = freqs.front() / df;
        first_bin = static_cast<int>(std::lround(k_lo));
        if (std::abs(k_lo - first_bin) > 1e-9 || first_bin < 1)
            throw UsageError("--freq-range must start on a DFT bin");
        num_bins = static_cast<int>(freqs.size());
        if (first_bin + num_bins - 1 > args.fft_size / 2 - 1)
            throw UsageError("--freq-range exceeds fft_size/2 - 1 bins");
    }

    // Solve the joint problem on the selected bins, then embed at bin
    // offsets 1..F with zeros below the first requested bin.
    BroadbandProblem problem;
    {
        // same construction as make_broadband_problem but starting at
        // first_bin
        double beta_sum = 0.0;
        for (int k = first_bin; k < first_bin + num_bins; ++k) {
            const double f = k * df;
            problem.frequencies.push_back(f);
            problem.transfer.push_back(
                build_transfer_matrix(scene, f, Grid::ControlPoints));
            problem.desired.push_back(
                desired_pressure(scene, f, Grid::ControlPoints).values);
            problem.gammas.push_back(gamma_at(resolved.config.gamma_mode, f));
            if (!resolved.config.beta)
                beta_sum += default_beta(problem.transfer.back());
        }
        problem.alpha = args.alpha;
        problem.rho = resolved.config.rho;
        problem.beta =
            resolved.config.beta ? *resolved.config.beta : beta_sum / num_bins;
    }

    const auto solved =
        solve_broadband(problem, resolved.config.max_iters, resolved.config.tol_primal);

    std::vector<DrivingSignal> spectra;
    const auto L = static_cast<Eigen::Index>(scene.loudspeakers.size());
    for (int k = 1; k < first_bin; ++k) {
        DrivingSignal zero;
        zero.frequency_hz = k * df;
        zero.values = Eigen::VectorXcd::Zero(L);
        zero.diagnostics.converged = true;
        zero.diagnostics.reason = "zero_fill";
        spectra.push_back(std::move(zero));
    }
    spectra.insert(spectra.end(), solved.begin(), solved.end());

    const int delay = args.delay ? *args.delay : args.fft_size / 2;
    FilterBank bank = fir_from_spectra(spectra, args.fft_size, args.sample_rate, delay);
    if (args.fade > 0) apply_edge_fade(bank, args.fade);

    WavData wav;
    wav.sample_rate = static_cast<int>(std::lround(args.sample_rate));
    wav.samples = bank.taps;
    write_wav_float32(args.out, wav);
    if (!args.signals_out.empty()) write_signals(args.signals_out, solved);

    json config_json = solver_config_json(resolved.config);
    config_json["alpha"] = args.alpha;
    config_json["beta_resolved"] = problem.beta;

    json meta;
    meta["sample_rate_hz"] = args.sample_rate;
    meta["fft_size"] = args.fft_size;
    meta["modeling_delay_samples"] = delay;
    meta["first_bin"] = first_bin;
    meta["num_bins"] = num_bins;
    meta["frequency_lo_hz"] = problem.frequencies.front();
    meta["frequency_hi_hz"] = problem.frequencies.back();
    meta["channels"] = static_cast<int>(L);
    meta["edge_fade_samples"] = args.fade;
    meta["scene_hash"] = scene_hash(scene);
    meta["solver_config_hash"] = hex64(fnv1a64(config_json.dump()));
    {
        std::ofstream out(args.out + ".meta.json", std::ios::binary);
        if (!out) throw IoError("cannot open for writing: " + args.out + ".meta.json");
        out << meta.dump(2) << "\n";
    }

    std::vector<std::string> outputs = {args.out, args.out + ".meta.json"};
    if (!args.signals_out.empty()) outputs.push_back(args.signals_out);
    write_manifest(args.out + ".manifest.json", command, scene, config_json,
                   problem.frequencies, outputs);

    const bool converged = solved.empty() || solved.front().diagnostics.converged;
    if (!converged)
        std::cerr << "warning: max iterations reached without convergence\n";
    return converged ? kExitOk : kExitNotConverged;
}

// -------------------------------------------------------------- evaluate ---

struct EvaluateArgs {
    std::string scene_file;
    std::string signals_file;
    std::string filters_file;
    std::vector<std::string> metrics;
    std::string binaural_file;
    std::string binaural_ref_file;
    std::vector<double> point{0.0, 0.0, 0.0};
    std::string band = "2000:8000";
    std::string grid = "control";
    bool compare = false;
    std::string freq_range;
    SolverFlags solver;
    std::string out = "metrics";
};

std::vector<DrivingSignal> signals_from_filters(const std::string& wav_path) {
    const WavData wav = read_wav(wav_path);
    std::ifstream meta_in(wav_path + ".meta.json");
    if (!meta_in)
        throw IoError("missing filter sidecar: " + wav_path + ".meta.json");
    json meta = json::parse(meta_in);
    const int fft_size = meta.at("fft_size").get<int>();
    const int delay = meta.at("modeling_delay_samples").get<int>();
    const int first_bin = meta.at("first_bin").get<int>();
    const int num_bins = meta.at("num_bins").get<int>();
    const double sr = meta.at("sample_rate_hz").get<double>();
    if (wav.samples.rows() != fft_size)
        throw ParseError("filter wav length disagrees with sidecar fft_size");

    // forward DFT per bin, undoing the modeling-delay phase
    std::vector<DrivingSignal> out(num_bins);
    const double df = sr / fft_size;
    for (int b = 0; b < num_bins; ++b) {
        const int k = first_bin + b;
        out[b].frequency_hz = k * df;
        out[b].values.resize(wav.samples.cols());
        for (Eigen::Index l = 0; l < wav.samples.cols(); ++l) {
            Complex acc = 0.0;
            for (int t = 0; t < fft_size; ++t)
                acc += wav.samples(t, l) *
                       std::polar(1.0, -2.0 * std::numbers::pi * k * t / fft_size);
            out[b].values(l) =
                acc * std::polar(1.0, 2.0 * std::numbers::pi * k * delay / fft_size);
        }
    }
    return out;
}

struct MetricRow {
    std::string metric;
    std::string method;
    std::string key1;  // frequency or position index
    std::string key2;  // azimuth index or empty
    double value;
};

void emit_rows(const std::string& out_prefix, const std::vector<MetricRow>& rows,
               json summary) {
    std::ofstream csv(out_prefix + ".csv", std::ios::binary);
    if (!csv) throw IoError("cannot open for writing: " + out_prefix + ".csv");
    csv << "metric,method,key1,key2,value\n";
    for (const auto& row : rows)
        csv << row.metric << ',' << row.method << ',' << row.key1 << ',' << row.key2
            << ',' << format_full(row.value) << '\n';

    std::ofstream js(out_prefix + ".json", std::ios::binary);
    if (!js) throw IoError("cannot open for writing: " + out_prefix + ".json");
    js << summary.dump(2) << "\n";
}

int cmd_evaluate(const EvaluateArgs& args, const std::string& command) {
    auto listed = [&](const std::string& name) {
        return std::find(args.metrics.begin(), args.metrics.end(), name) !=
               args.metrics.end();
    };
    // An empty --metrics list means "all metrics that have their inputs".
    auto requested = [&](const std::string& name) {
        return args.metrics.empty() || listed(name);
    };
    for (const auto& m : args.metrics) {
        if (m != "synthesis-error" && m != "amplitude-error" &&
            m != "amplitude-response" && m != "flatness" && m != "ild" && m != "ild-ne")
            throw UsageError("unknown metric '" + m + "'");
    }
    if ((listed("ild") || listed("ild-ne")) && args.binaural_file.empty())
        throw UsageError("--binaural is required for ILD metrics");
    if (args.grid != "control" && args.grid != "eval")
        throw UsageError("--grid must be control or eval");
    if (args.point.size() != 3) throw UsageError("--point expects x y z");

    const Scene scene = load_scene(args.scene_file);

    double band_lo = 0.0, band_hi = 0.0;
    if (std::sscanf(args.band.c_str(), "%lf:%lf", &band_lo, &band_hi) != 2 ||
        band_hi < band_lo)
        throw UsageError("--band expects lo:hi");

    // gather one or two labeled signal sets
    std::vector<std::pair<std::string, std::vector<DrivingSignal>>> sets;
    if (args.compare) {
        if (args.freq_range.empty())
            throw UsageError("--compare requires --freq-range");
        const auto defaults = read_scene_solver_defaults(args.scene_file);
        const ResolvedSolver resolved = resolve_solver(args.solver, defaults);
        const std::vector<double> freqs = parse_freq_range(args.freq_range);
        sets.emplace_back("pm", run_solves(scene, freqs, "pm", resolved, false));
        sets.emplace_back("combined",
                          run_solves(scene, freqs, "combined", resolved, false));
    } else if (!args.signals_file.empty()) {
        sets.emplace_back("signals", read_signals(args.signals_file));
    } else if (!args.filters_file.empty()) {
        sets.emplace_back("filters", signals_from_filters(args.filters_file));
    } else {
        throw UsageError("provide --signals, --filters or --compare");
    }

    const Point3 point{args.point[0], args.point[1], args.point[2]};
    const Grid grid = args.grid == "control" ? Grid::ControlPoints : Grid::EvalPoints;

    std::vector<MetricRow> rows;
    json summary;
    summary["scene_hash"] = scene_hash(scene);

    for (const auto& [method, signals] : sets) {
        std::vector<double> freqs;
        for (const auto& s : signals) freqs.push_back(s.frequency_hz);

        if (requested("synthesis-error") || requested("amplitude-error")) {
            for (const auto& sig : signals) {
                const TransferMatrix G =
                    build_transfer_matrix(scene, sig.frequency_hz, grid);
                const PressureVector u =
                    desired_pressure(scene, sig.frequency_hz, grid);
                if (requested("synthesis-error"))
                    rows.push_back({"synthesis-error", method,
                                    format_full(sig.frequency_hz), "",
                                    discrete_synthesis_error(G, sig.values, u.values)});
                if (requested("amplitude-error"))
                    rows.push_back({"amplitude-error", method,
                                    format_full(sig.frequency_hz), "",
                                    amplitude_error(G, sig.values, u.values)});
            }
        }

        if (requested("amplitude-response") || requested("flatness")) {
            const AmplitudeResponse resp = amplitude_response_at(point, scene, signals);
            const AmplitudeResponse want = desired_response_at(point, scene, freqs);
            if (requested("amplitude-response")) {
                for (std::size_t i = 0; i < resp.frequencies.size(); ++i) {
                    rows.push_back({"amplitude-response", method,
                                    format_full(resp.frequencies[i]), "syn",
                                    resp.magnitude_db[i]});
                    rows.push_back({"amplitude-response", method,
                                    format_full(want.frequencies[i]), "des",
                                    want.magnitude_db[i]});
                }
            }
            if (requested("flatness")) {
                const double std_db = flatness_std_db(resp, want, band_lo, band_hi);
                rows.push_back({"flatness-std-db", method, args.band, "", std_db});
                summary["flatness_std_db"][method] = std_db;
            }
        }

        if ((requested("ild") || requested("ild-ne")) && !args.binaural_file.empty()) {
            const BinauralSet set = read_binaural(args.binaural_file);
            const Eigen::MatrixXd syn_ild = ild(set, signals);
            if (requested("ild")) {
                for (Eigen::Index p = 0; p < syn_ild.rows(); ++p)
                    for (Eigen::Index a = 0; a < syn_ild.cols(); ++a)
                        rows.push_back({"ild", method, std::to_string(p),
                                        std::to_string(a), syn_ild(p, a)});
            }
            if (requested("ild-ne")) {
                if (args.binaural_ref_file.empty())
                    throw UsageError("--binaural-ref is required for ild-ne");
                const BinauralSet ref_set = read_binaural(args.binaural_ref_file);
                if (ref_set.num_loudspeakers != 1)
                    throw UsageError(
                        "--binaural-ref must hold source-to-ear transfers (one source)");
                std::vector<DrivingSignal> unit(ref_set.frequencies.size());
                for (std::size_t f = 0; f < unit.size(); ++f) {
                    unit[f].frequency_hz = ref_set.frequencies[f];
                    unit[f].values = Eigen::VectorXcd::Constant(1, scene.desired.gain);
                }
                const Eigen::MatrixXd ref_ild = ild(ref_set, unit);
                const Eigen::VectorXd ne = ild_normalized_error(syn_ild, ref_ild);
                for (Eigen::Index p = 0; p < ne.size(); ++p)
                    rows.push_back(
                        {"ild-ne", method, std::to_string(p), "", ne(p)});
            }
        }
    }

    // comparison deltas: combined minus pm where both were computed
    if (args.compare) {
        json deltas;
        if (summary.contains("flatness_std_db")) {
            const double pm = summary["flatness_std_db"]["pm"].get<double>();
            const double combined = summary["flatness_std_db"]["combined"].get<double>();
            deltas["flatness_std_db"] = combined - pm;
        }
        summary["delta_combined_minus_pm"] = deltas;
    }

    emit_rows(args.out, rows, summary);

    std::vector<double> manifest_freqs;
    for (const auto& s : sets.front().second)
        manifest_freqs.push_back(s.frequency_hz);
    write_manifest(args.out + ".manifest.json", command, scene, json::object(),
                   manifest_freqs, {args.out + ".csv", args.out + ".json"});
    return kExitOk;
}

// ---------------------------------------------------------------- render ---

struct RenderArgs {
    std::string filters_file;
    std::string input_file;
    std::string out = "rendered.wav";
};

int cmd_render(const RenderArgs& args) {
    const WavData bank = read_wav(args.filters_file);
    const WavData input = read_wav(args.input_file);
    if (bank.sample_rate != input.sample_rate)
        throw ValidationError("render: sample rates differ (" +
                              std::to_string(bank.sample_rate) + " vs " +
                              std::to_string(input.sample_rate) + ")");
    if (input.samples.cols() != 1)
        throw ValidationError("render: input must be mono");

    const Eigen::Index taps = bank.samples.rows();
    const Eigen::Index n = input.samples.rows();
    const Eigen::Index channels = bank.samples.cols();

    WavData out;
    out.sample_rate = input.sample_rate;
    out.samples = Eigen::MatrixXd::Zero(n + taps - 1, channels);
    for (Eigen::Index c = 0; c < channels; ++c)
        for (Eigen::Index t = 0; t < n; ++t) {
            const double x = input.samples(t, 0);
            if (x == 0.0) continue;
            for (Eigen::Index k = 0; k < taps; ++k)
                out.samples(t + k, c) += x * bank.samples(k, c);
        }
    write_wav_float32(args.out, out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sound field synthesis: pressure/amplitude matching solvers, "
                 "broadband FIR design and evaluation"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Compute driving signals");
    solve->add_option("scene", solve_args.scene_file, "Scene config file")->required();
    solve->add_option("--freq", solve_args.freq, "Single frequency in Hz");
    solve->add_option("--freq-range", solve_args.freq_range, "lo:hi:count in Hz");
    solve->add_option("--method", solve_args.method, "pm | am | combined");
    solve_args.solver.add_to(solve);
    solve->add_option("--out", solve_args.out, "Output signals file (.csv or binary)");
    solve->add_flag("--cold", solve_args.cold,
                    "Disable warm starting; solve frequencies independently");

    DesignArgs design_args;
    auto* design = app.add_subcommand("design-filters", "Design broadband FIR filters");
    design->add_option("scene", design_args.scene_file, "Scene config file")->required();
    design->add_option("--fft-size", design_args.fft_size, "FIR length (even)");
    design->add_option("--sample-rate", design_args.sample_rate, "Sample rate in Hz");
    design->add_option("--alpha", design_args.alpha, "Differential-norm penalty weight");
    design->add_option("--delay", design_args.delay,
                       "Modeling delay in samples (default fft_size/2)");
    design->add_option("--fade", design_args.fade, "Raised-cosine edge fade in samples");
    design->add_option("--freq-range", design_args.freq_range,
                       "lo:hi:count aligned to DFT bins (default: all bins)");
    design_args.solver.add_to(design);
    design->add_option("--out", design_args.out, "Output multichannel WAV");
    design->add_option("--signals-out", design_args.signals_out,
                       "Also write the per-bin driving signals");

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate signals or filters");
    evaluate->add_option("scene", eval_args.scene_file, "Scene config file")->required();
    evaluate->add_option("--signals", eval_args.signals_file, "Driving-signal file");
    evaluate->add_option("--filters", eval_args.filters_file, "Filter bank WAV");
    evaluate->add_option("--metrics", eval_args.metrics,
                         "synthesis-error amplitude-error amplitude-response "
                         "flatness ild ild-ne")
        ->delimiter(',');
    evaluate->add_option("--binaural", eval_args.binaural_file,
                         "Loudspeaker-to-ear transfer data");
    evaluate->add_option("--binaural-ref", eval_args.binaural_ref_file,
                         "Source-to-ear transfer data for the reference ILD");
    evaluate->add_option("--point", eval_args.point,
                         "Evaluation point for response metrics")
        ->expected(3);
    evaluate->add_option("--band", eval_args.band, "Flatness band lo:hi in Hz");
    evaluate->add_option("--grid", eval_args.grid, "control | eval");
    evaluate->add_flag("--compare", eval_args.compare,
                       "Solve pm and combined internally and emit both");
    evaluate->add_option("--freq-range", eval_args.freq_range,
                         "lo:hi:count for --compare");
    eval_args.solver.add_to(evaluate);
    evaluate->add_option("--out", eval_args.out, "Output prefix");

    RenderArgs render_args;
    auto* render = app.add_subcommand("render", "Convolve a mono WAV with a filter bank");
    render->add_option("filters", render_args.filters_file, "Filter bank WAV")
        ->required();
    render->add_option("input", render_args.input_file, "Mono input WAV")->required();
    render->add_option("--out", render_args.out, "Output multichannel WAV");

    std::string make_out = "scene.json";
    bool make_paper = false;
    auto* make = app.add_subcommand("make-scene", "Write a scene config file");
    make->add_flag("--paper", make_paper, "Emit the built-in reference scene");
    make->add_option("--out", make_out, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::string command = join_args(argc, argv);
    try {
        if (solve->parsed()) return cmd_solve(solve_args, command);
        if (design->parsed()) return cmd_design_filters(design_args, command);
        if (evaluate->parsed()) return cmd_evaluate(eval_args, command);
        if (render->parsed()) return cmd_render(render_args);
        if (make->parsed()) {
            if (!make_paper)
                throw UsageError("make-scene currently requires --paper");
            std::ofstream out(make_out, std::ios::binary);
            if (!out) throw IoError("cannot open for writing: " + make_out);
            out << serialize_scene(build_paper_scene());
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
