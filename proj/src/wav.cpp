#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "tcd/signal.hpp"

namespace tcd {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw std::invalid_argument("wav: not a RIFF/WAVE stream");

  int sample_rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) throw std::invalid_argument("wav: truncated chunk");

    if (tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16) throw std::invalid_argument("wav: short fmt chunk");
      const auto format = read_u16(bytes, body);
      const auto channels = read_u16(bytes, body + 2);
      const auto bits = read_u16(bytes, body + 14);
      if (format != 1) throw std::invalid_argument("wav: only PCM is supported");
      if (channels != 1) throw std::invalid_argument("wav: only mono is supported");
      if (bits != 16) throw std::invalid_argument("wav: only 16-bit samples are supported");
      sample_rate = static_cast<int>(read_u32(bytes, body + 4));
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw std::invalid_argument("wav: data chunk before fmt chunk");
      Waveform out;
      out.sample_rate = sample_rate;
      out.samples.reserve(chunk_size / 2);
      for (std::size_t i = 0; i + 1 < chunk_size; i += 2) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes, body + i));
        out.samples.push_back(static_cast<double>(raw) / 32768.0);
      }
      out.validate();
      return out;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw std::invalid_argument("wav: no data chunk");
}

std::vector<std::uint8_t> encode_wav(const Waveform& x) {
  x.validate();
  const auto data_bytes = static_cast<std::uint32_t>(x.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double v : x.samples) {
    const double clamped = std::clamp(v, -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open wav file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const std::string& path, const Waveform& x) {
  const auto bytes = encode_wav(x);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write wav file '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tcd
