#pragma once

#include "rircoh/types.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace rircoh {

enum class WavFormat { Pcm16, Pcm24, Pcm32, Float32, Float64 };

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::size_t frames = 0;
};

WavInfo read_wav_info(const std::filesystem::path& path);

// All channels, de-interleaved. Integer PCM is divided by 2^(bits-1), so the
// most negative code maps to exactly -1; float data passes through unchanged.
std::vector<std::vector<double>> read_wav_channels(const std::filesystem::path& path,
                                                   WavInfo* info = nullptr);

// One channel as an Rir. meta.id defaults to the file stem (with "#<channel>"
// appended for channels other than 0).
Rir load_wav(const std::filesystem::path& path, int channel, RirMeta meta = {});

// Writes equal-length channels. Integer formats round and saturate.
void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               int sample_rate, WavFormat format);

}  // namespace rircoh
