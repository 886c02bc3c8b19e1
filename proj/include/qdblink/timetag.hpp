#ifndef QDBLINK_TIMETAG_HPP
#define QDBLINK_TIMETAG_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdblink/dynamics.hpp"

namespace qdb {

enum class Channel : std::uint8_t { kX = 0, kXX = 1, kXPlus = 2, kAux = 3 };

inline constexpr std::size_t kChannelCount = 4;

std::string_view channel_name(Channel c);
/// Accepts "X", "XX", "XPLUS"/"X+", "AUX" (case-insensitive) or a channel number.
std::optional<Channel> parse_channel(std::string_view name);

struct TimeTag {
  std::int64_t timestamp_ps = 0;
  Channel channel = Channel::kX;

  bool operator==(const TimeTag&) const = default;
};

struct StreamProvenance {
  RateSet rates;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// Detection records sorted by timestamp. Ties are ordered by channel.
class TimeTagStream {
 public:
  TimeTagStream() = default;
  TimeTagStream(std::vector<TimeTag> records, std::int64_t duration_ps,
                std::int64_t rep_period_ps);

  std::span<const TimeTag> records() const { return records_; }
  std::int64_t duration_ps() const { return duration_ps_; }
  std::int64_t rep_period_ps() const { return rep_period_ps_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Sorted timestamps of a single channel.
  std::vector<std::int64_t> channel_times(Channel c) const;
  std::array<std::size_t, kChannelCount> counts_per_channel() const;

  StreamProvenance& provenance() { return provenance_; }
  const StreamProvenance& provenance() const { return provenance_; }

 private:
  std::vector<TimeTag> records_;
  std::int64_t duration_ps_ = 0;
  std::int64_t rep_period_ps_ = 0;
  StreamProvenance provenance_;
};

}  // namespace qdb

#endif  // QDBLINK_TIMETAG_HPP
