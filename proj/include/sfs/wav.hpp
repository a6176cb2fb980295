#ifndef SFS_WAV_HPP
#define SFS_WAV_HPP

#include <string>

#include <Eigen/Dense>

namespace sfs {

/// Interleaved multichannel audio; samples is frames x channels.
struct WavData {
    int sample_rate = 0;
    Eigen::MatrixXd samples;
};

/// Writes RIFF/WAVE, IEEE float32, little-endian, channels interleaved.
void write_wav_float32(const std::string& path, const WavData& data);

/// Reads float32 or PCM16 WAV files (PCM16 scaled to [-1, 1)).
WavData read_wav(const std::string& path);

}  // namespace sfs

#endif  // SFS_WAV_HPP
