#include "sfs/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sfs/errors.hpp"

namespace sfs {

namespace {

template <typename T>
void write_raw(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void write_tag(std::ofstream& out, const char tag[5]) { out.write(tag, 4); }

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw ParseError(std::string("wav: truncated reading ") + what);
    return value;
}

}  // namespace

void write_wav_float32(const std::string& path, const WavData& data) {
    if (data.sample_rate <= 0) throw ValidationError("wav: sample rate must be > 0");
    if (data.samples.cols() < 1) throw ValidationError("wav: at least one channel");

    const auto channels = static_cast<std::uint16_t>(data.samples.cols());
    const auto frames = static_cast<std::uint32_t>(data.samples.rows());
    const std::uint32_t data_bytes = frames * channels * 4;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    write_tag(out, "RIFF");
    write_raw<std::uint32_t>(out, 36 + data_bytes);
    write_tag(out, "WAVE");
    write_tag(out, "fmt ");
    write_raw<std::uint32_t>(out, 16);
    write_raw<std::uint16_t>(out, 3);  // IEEE float
    write_raw<std::uint16_t>(out, channels);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(data.sample_rate));
    write_raw<std::uint32_t>(out,
                             static_cast<std::uint32_t>(data.sample_rate) * channels * 4);
    write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(channels * 4));
    write_raw<std::uint16_t>(out, 32);
    write_tag(out, "data");
    write_raw<std::uint32_t>(out, data_bytes);

    for (Eigen::Index t = 0; t < data.samples.rows(); ++t)
        for (Eigen::Index c = 0; c < data.samples.cols(); ++c)
            write_raw<float>(out, static_cast<float>(data.samples(t, c)));
    if (!out) throw IoError("write failed: " + path);
}

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open wav file: " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw ParseError("wav: not a RIFF file: " + path);
    read_raw<std::uint32_t>(in, "riff size");
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw ParseError("wav: not a WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    std::vector<char> payload;

    while (in.read(tag, 4)) {
        const auto chunk_size = read_raw<std::uint32_t>(in, "chunk size");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_raw<std::uint16_t>(in, "format");
            channels = read_raw<std::uint16_t>(in, "channels");
            sample_rate = read_raw<std::uint32_t>(in, "sample rate");
            read_raw<std::uint32_t>(in, "byte rate");
            read_raw<std::uint16_t>(in, "block align");
            bits = read_raw<std::uint16_t>(in, "bits");
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            payload.resize(chunk_size);
            in.read(payload.data(), chunk_size);
            if (!in) throw ParseError("wav: truncated data chunk in " + path);
        } else {
            in.seekg(chunk_size + (chunk_size % 2), std::ios::cur);
        }
    }
    if (!have_fmt || payload.empty())
        throw ParseError("wav: missing fmt or data chunk in " + path);
    if (channels == 0) throw ParseError("wav: zero channels in " + path);

    WavData out;
    out.sample_rate = static_cast<int>(sample_rate);
    if (format == 3 && bits == 32) {
        const std::size_t count = payload.size() / 4;
        const auto frames = static_cast<Eigen::Index>(count / channels);
        out.samples.resize(frames, channels);
        const float* src = reinterpret_cast<const float*>(payload.data());
        for (Eigen::Index t = 0; t < frames; ++t)
            for (Eigen::Index c = 0; c < channels; ++c)
                out.samples(t, c) = static_cast<double>(src[t * channels + c]);
    } else if (format == 1 && bits == 16) {
        const std::size_t count = payload.size() / 2;
        const auto frames = static_cast<Eigen::Index>(count / channels);
        out.samples.resize(frames, channels);
        const std::int16_t* src = reinterpret_cast<const std::int16_t*>(payload.data());
        for (Eigen::Index t = 0; t < frames; ++t)
            for (Eigen::Index c = 0; c < channels; ++c)
                out.samples(t, c) = src[t * channels + c] / 32768.0;
    } else {
        throw ParseError("wav: unsupported format (want float32 or pcm16): " + path);
    }
    return out;
}

}  // namespace sfs
