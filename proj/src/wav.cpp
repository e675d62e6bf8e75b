#include "rircoh/wav.hpp"

#include "rircoh/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace rircoh {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t le_u64(const unsigned char* p) {
  return static_cast<std::uint64_t>(le_u32(p)) | (static_cast<std::uint64_t>(le_u32(p + 4)) << 32);
}

struct Parsed {
  WavInfo info;
  std::vector<unsigned char> bytes;
  std::size_t data_offset = 0;
};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw IoError(path.string() + ": " + what);
}

Parsed parse(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  Parsed p;
  p.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const auto& b = p.bytes;
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    fail(path, "not a RIFF/WAVE file");

  bool have_fmt = false;
  bool have_data = false;
  std::uint16_t format = 0;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const char* id = reinterpret_cast<const char*>(b.data() + pos);
    const std::size_t size = le_u32(b.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + size > b.size()) fail(path, "truncated fmt chunk");
      format = le_u16(b.data() + body);
      p.info.channels = le_u16(b.data() + body + 2);
      p.info.sample_rate = static_cast<int>(le_u32(b.data() + body + 4));
      p.info.bits_per_sample = le_u16(b.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) fail(path, "truncated WAVE_FORMAT_EXTENSIBLE header");
        format = le_u16(b.data() + body + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (body + size > b.size()) fail(path, "truncated file: data chunk extends past end of file");
      p.data_offset = body;
      data_size = size;
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) fail(path, "missing fmt chunk");
  if (!have_data) fail(path, "missing data chunk");
  if (p.info.channels <= 0) fail(path, "invalid channel count");
  if (p.info.sample_rate <= 0) fail(path, "invalid sample rate");

  const int bits = p.info.bits_per_sample;
  if (format == kFormatPcm) {
    if (bits != 16 && bits != 24 && bits != 32) {
      std::ostringstream os;
      os << "unsupported codec: " << bits << "-bit integer PCM";
      fail(path, os.str());
    }
  } else if (format == kFormatFloat) {
    if (bits != 32 && bits != 64) fail(path, "unsupported codec: float with odd sample size");
    p.info.is_float = true;
  } else {
    std::ostringstream os;
    os << "unsupported codec (format tag " << format << ")";
    fail(path, os.str());
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * static_cast<std::size_t>(p.info.channels);
  if (data_size % frame_bytes != 0) fail(path, "truncated file: partial sample frame");
  p.info.frames = data_size / frame_bytes;
  return p;
}

double decode(const unsigned char* s, const WavInfo& info) {
  switch (info.bits_per_sample) {
    case 16:
      return static_cast<std::int16_t>(le_u16(s)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(s[0] | (s[1] << 8) | (s[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32:
      if (info.is_float) return std::bit_cast<float>(le_u32(s));
      return static_cast<std::int32_t>(le_u32(s)) / 2147483648.0;
    default:
      return std::bit_cast<double>(le_u64(s));
  }
}

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

WavInfo read_wav_info(const std::filesystem::path& path) { return parse(path).info; }

std::vector<std::vector<double>> read_wav_channels(const std::filesystem::path& path, WavInfo* info_out) {
  const Parsed p = parse(path);
  const auto& info = p.info;
  const std::size_t width = static_cast<std::size_t>(info.bits_per_sample / 8);
  const std::size_t channels = static_cast<std::size_t>(info.channels);
  std::vector<std::vector<double>> out(channels, std::vector<double>(info.frames));
  const unsigned char* data = p.bytes.data() + p.data_offset;
  for (std::size_t f = 0; f < info.frames; ++f)
    for (std::size_t c = 0; c < channels; ++c)
      out[c][f] = decode(data + (f * channels + c) * width, info);
  if (info_out) *info_out = info;
  return out;
}

Rir load_wav(const std::filesystem::path& path, int channel, RirMeta meta) {
  WavInfo info;
  auto channels = read_wav_channels(path, &info);
  if (channel < 0 || channel >= info.channels) {
    std::ostringstream os;
    os << "channel " << channel << " requested but the file has " << info.channels;
    fail(path, os.str());
  }
  if (meta.id.empty()) {
    meta.id = path.stem().string();
    if (channel != 0) meta.id += "#" + std::to_string(channel);
  }
  if (meta.channel_id.empty()) meta.channel_id = std::to_string(channel);
  try {
    return Rir(info.sample_rate, std::move(channels[static_cast<std::size_t>(channel)]), std::move(meta));
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
}

void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               int sample_rate, WavFormat format) {
  if (channels.empty()) throw IoError(path.string() + ": no channels to write");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels)
    if (c.size() != frames) throw IoError(path.string() + ": channels differ in length");

  int bits = 16;
  bool is_float = false;
  switch (format) {
    case WavFormat::Pcm16: bits = 16; break;
    case WavFormat::Pcm24: bits = 24; break;
    case WavFormat::Pcm32: bits = 32; break;
    case WavFormat::Float32: bits = 32; is_float = true; break;
    case WavFormat::Float64: bits = 64; is_float = true; break;
  }
  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t data_bytes = frames * channels.size() * width;
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  put_le(out, 36 + data_bytes, 4);
  tag("WAVE");
  tag("fmt ");
  put_le(out, 16, 4);
  put_le(out, is_float ? kFormatFloat : kFormatPcm, 2);
  put_le(out, channels.size(), 2);
  put_le(out, static_cast<std::uint64_t>(sample_rate), 4);
  put_le(out, static_cast<std::uint64_t>(sample_rate) * channels.size() * width, 4);
  put_le(out, channels.size() * width, 2);
  put_le(out, static_cast<std::uint64_t>(bits), 2);
  tag("data");
  put_le(out, data_bytes, 4);
  for (std::size_t f = 0; f < frames; ++f) {
    for (const auto& c : channels) {
      const double v = c[f];
      if (format == WavFormat::Float64) {
        put_le(out, std::bit_cast<std::uint64_t>(v), 8);
      } else if (format == WavFormat::Float32) {
        put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
      } else {
        const double scale = std::ldexp(1.0, bits - 1);
        const double q = std::clamp(std::round(v * scale), -scale, scale - 1.0);
        put_le(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(q)), static_cast<int>(width));
      }
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError(path.string() + ": cannot open for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError(path.string() + ": write failed");
}

}  // namespace rircoh
