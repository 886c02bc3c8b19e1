#ifndef QDBLINK_QTT_FILE_HPP
#define QDBLINK_QTT_FILE_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qdblink/timetag.hpp"

namespace qdb {

// QTT1 layout, all integers little-endian, no padding:
//   header  "QTT1" | u32 version | u16 channel_count | u64 rep_period_ps
//           | u64 duration_ps | u64 record_count                (34 bytes)
//   record  u8 channel | u64 timestamp_ps                       (9 bytes)
inline constexpr std::uint32_t kQttVersion = 1;
inline constexpr std::size_t kQttHeaderSize = 34;
inline constexpr std::size_t kQttRecordSize = 9;

std::vector<std::uint8_t> encode_qtt(const TimeTagStream& stream);

/// Throws IoError on a bad magic, version, truncated or oversized payload,
/// and on records that violate the stream invariants.
TimeTagStream decode_qtt(const std::vector<std::uint8_t>& bytes);

void write_qtt(const std::filesystem::path& path, const TimeTagStream& stream);
TimeTagStream read_qtt(const std::filesystem::path& path);

}  // namespace qdb

#endif  // QDBLINK_QTT_FILE_HPP
