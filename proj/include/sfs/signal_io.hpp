#ifndef SFS_SIGNAL_IO_HPP
#define SFS_SIGNAL_IO_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sfs/solvers.hpp"

namespace sfs {

/// CSV export, header `frequency_hz,loudspeaker,re,im`, 17 significant
/// digits so values round-trip exactly.
void write_signals_csv(const std::string& path,
                       const std::vector<DrivingSignal>& signals);
std::vector<DrivingSignal> read_signals_csv(const std::string& path);

/// Binary layout (little-endian): magic "SFSDSIG1", uint32 L, uint32 F,
/// F float64 frequencies, then F x L complex values row-major by frequency
/// as float64 (re, im) pairs.
void write_signals_binary(const std::string& path,
                          const std::vector<DrivingSignal>& signals);
std::vector<DrivingSignal> read_signals_binary(const std::string& path);

/// Dispatches on extension: .csv reads/writes CSV, everything else binary.
void write_signals(const std::string& path, const std::vector<DrivingSignal>& signals);
std::vector<DrivingSignal> read_signals(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Hash of the serialized scene, used in manifests and sidecar metadata.
std::string scene_hash(const Scene& scene);

/// Formats a double with 17 significant digits (exact round trip).
std::string format_full(double value);

}  // namespace sfs

#endif  // SFS_SIGNAL_IO_HPP
