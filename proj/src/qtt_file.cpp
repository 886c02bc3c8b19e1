#include "qdblink/qtt_file.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "qdblink/error.hpp"

namespace qdb {
namespace {

constexpr char kMagic[4] = {'Q', 'T', 'T', '1'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <typename T>
T get(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_qtt(const TimeTagStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(kQttHeaderSize + kQttRecordSize * stream.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kQttVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(kChannelCount));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(stream.rep_period_ps()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(stream.duration_ps()));
  put<std::uint64_t>(out, stream.size());
  for (const auto& r : stream.records()) {
    out.push_back(static_cast<std::uint8_t>(r.channel));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(r.timestamp_ps));
  }
  return out;
}

TimeTagStream decode_qtt(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kQttHeaderSize) throw IoError("QTT1: file shorter than the header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("QTT1: bad magic");
  const std::uint8_t* p = bytes.data() + 4;
  const auto version = get<std::uint32_t>(p);
  if (version != kQttVersion) {
    throw IoError("QTT1: unsupported version " + std::to_string(version));
  }
  const auto channels = get<std::uint16_t>(p + 4);
  const auto period = get<std::uint64_t>(p + 6);
  const auto duration = get<std::uint64_t>(p + 14);
  const auto count = get<std::uint64_t>(p + 22);
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  if (period > kMax || duration > kMax) throw IoError("QTT1: header value out of range");
  const std::uint64_t payload = bytes.size() - kQttHeaderSize;
  if (count > payload / kQttRecordSize || payload != count * kQttRecordSize) {
    throw IoError("QTT1: record_count " + std::to_string(count) + " does not match a payload of " +
                  std::to_string(payload) + " bytes");
  }

  std::vector<TimeTag> records(count);
  const std::uint8_t* r = bytes.data() + kQttHeaderSize;
  for (std::uint64_t i = 0; i < count; ++i, r += kQttRecordSize) {
    if (r[0] >= channels) throw IoError("QTT1: record " + std::to_string(i) + " has a bad channel");
    const auto ts = get<std::uint64_t>(r + 1);
    if (ts > kMax) throw IoError("QTT1: timestamp out of range");
    records[i] = {static_cast<std::int64_t>(ts), static_cast<Channel>(r[0])};
  }
  try {
    return TimeTagStream(std::move(records), static_cast<std::int64_t>(duration),
                         static_cast<std::int64_t>(period));
  } catch (const ValidationError& e) {
    throw IoError(std::string("QTT1: ") + e.what());
  }
}

void write_qtt(const std::filesystem::path& path, const TimeTagStream& stream) {
  const auto bytes = encode_qtt(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

TimeTagStream read_qtt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read from " + path.string() + " failed");
  return decode_qtt(bytes);
}

}  // namespace qdb
