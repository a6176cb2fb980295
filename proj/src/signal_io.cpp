#include "sfs/signal_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sfs/errors.hpp"
#include "sfs/scene.hpp"

namespace sfs {

std::string format_full(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string scene_hash(const Scene& scene) {
    return hex64(fnv1a64(serialize_scene(scene)));
}

void write_signals_csv(const std::string& path,
                       const std::vector<DrivingSignal>& signals) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "frequency_hz,loudspeaker,re,im\n";
    for (const auto& sig : signals) {
        for (Eigen::Index l = 0; l < sig.values.size(); ++l) {
            out << format_full(sig.frequency_hz) << ',' << l << ','
                << format_full(sig.values(l).real()) << ','
                << format_full(sig.values(l).imag()) << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<DrivingSignal> read_signals_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open signals file: " + path);

    std::string line;
    if (!std::getline(in, line) || line != "frequency_hz,loudspeaker,re,im")
        throw ParseError("signals csv: missing header in " + path);

    std::vector<DrivingSignal> out;
    std::vector<Complex> current;
    double current_freq = 0.0;
    bool have_current = false;
    int line_no = 1;

    auto flush = [&]() {
        if (!have_current) return;
        DrivingSignal sig;
        sig.frequency_hz = current_freq;
        sig.values = Eigen::Map<const Eigen::VectorXcd>(
            current.data(), static_cast<Eigen::Index>(current.size()));
        out.push_back(std::move(sig));
        current.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double freq = 0.0, re = 0.0, im = 0.0;
        long spk = 0;
        if (std::sscanf(line.c_str(), "%lf,%ld,%lf,%lf", &freq, &spk, &re, &im) != 4)
            throw ParseError("signals csv: bad row at line " + std::to_string(line_no) +
                             " in " + path);
        if (!have_current || freq != current_freq) {
            flush();
            current_freq = freq;
            have_current = true;
        }
        if (spk != static_cast<long>(current.size()))
            throw ParseError("signals csv: loudspeaker indices out of order at line " +
                             std::to_string(line_no) + " in " + path);
        current.emplace_back(re, im);
    }
    flush();
    if (out.empty()) throw ParseError("signals csv: no data rows in " + path);
    return out;
}

namespace {

constexpr char kSignalsMagic[8] = {'S', 'F', 'S', 'D', 'S', 'I', 'G', '1'};

}  // namespace

void write_signals_binary(const std::string& path,
                          const std::vector<DrivingSignal>& signals) {
    if (signals.empty()) throw ValidationError("write_signals: empty signal list");
    const Eigen::Index L = signals[0].values.size();
    for (const auto& sig : signals)
        if (sig.values.size() != L)
            throw DimensionError("write_signals: inconsistent loudspeaker counts");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kSignalsMagic, sizeof(kSignalsMagic));
    const auto l32 = static_cast<std::uint32_t>(L);
    const auto f32 = static_cast<std::uint32_t>(signals.size());
    out.write(reinterpret_cast<const char*>(&l32), 4);
    out.write(reinterpret_cast<const char*>(&f32), 4);
    for (const auto& sig : signals)
        out.write(reinterpret_cast<const char*>(&sig.frequency_hz), 8);
    for (const auto& sig : signals) {
        for (Eigen::Index l = 0; l < L; ++l) {
            const double re = sig.values(l).real();
            const double im = sig.values(l).imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<DrivingSignal> read_signals_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open signals file: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kSignalsMagic, sizeof(magic)) != 0)
        throw ParseError("signals binary: bad magic in " + path);

    std::uint32_t L = 0, F = 0;
    in.read(reinterpret_cast<char*>(&L), 4);
    in.read(reinterpret_cast<char*>(&F), 4);
    if (!in || L == 0 || F == 0)
        throw ParseError("signals binary: bad header in " + path);

    std::vector<double> freqs(F);
    in.read(reinterpret_cast<char*>(freqs.data()), 8 * F);
    if (!in) throw ParseError("signals binary: truncated frequency table in " + path);

    std::vector<DrivingSignal> out(F);
    for (std::uint32_t f = 0; f < F; ++f) {
        out[f].frequency_hz = freqs[f];
        out[f].values.resize(L);
        for (std::uint32_t l = 0; l < L; ++l) {
            double re = 0.0, im = 0.0;
            in.read(reinterpret_cast<char*>(&re), 8);
            in.read(reinterpret_cast<char*>(&im), 8);
            if (!in) throw ParseError("signals binary: truncated data in " + path);
            out[f].values(static_cast<Eigen::Index>(l)) = Complex(re, im);
        }
    }
    return out;
}

namespace {

bool has_csv_extension(const std::string& path) {
    const auto dot = path.find_last_of('.');
    return dot != std::string::npos && path.substr(dot) == ".csv";
}

}  // namespace

void write_signals(const std::string& path, const std::vector<DrivingSignal>& signals) {
    if (has_csv_extension(path))
        write_signals_csv(path, signals);
    else
        write_signals_binary(path, signals);
}

std::vector<DrivingSignal> read_signals(const std::string& path) {
    if (has_csv_extension(path)) return read_signals_csv(path);
    return read_signals_binary(path);
}

}  // namespace sfs
