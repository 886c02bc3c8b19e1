#include "qdblink/timetag.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "qdblink/error.hpp"

namespace qdb {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::kX: return "X";
    case Channel::kXX: return "XX";
    case Channel::kXPlus: return "XPLUS";
    case Channel::kAux: return "AUX";
  }
  return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
  if (upper == "X") return Channel::kX;
  if (upper == "XX") return Channel::kXX;
  if (upper == "XPLUS" || upper == "X+") return Channel::kXPlus;
  if (upper == "AUX") return Channel::kAux;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(upper.data(), upper.data() + upper.size(), value);
  if (ec == std::errc() && ptr == upper.data() + upper.size() && value < kChannelCount) {
    return static_cast<Channel>(value);
  }
  return std::nullopt;
}

TimeTagStream::TimeTagStream(std::vector<TimeTag> records, std::int64_t duration_ps,
                             std::int64_t rep_period_ps)
    : records_(std::move(records)), duration_ps_(duration_ps), rep_period_ps_(rep_period_ps) {
  if (duration_ps_ < 0) throw ValidationError("TimeTagStream: negative duration");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto t = records_[i].timestamp_ps;
    if (t < 0 || t > duration_ps_) {
      throw ValidationError("TimeTagStream: timestamp outside [0, duration]");
    }
    if (i > 0 && t < records_[i - 1].timestamp_ps) {
      throw ValidationError("TimeTagStream: timestamps are not sorted");
    }
    if (static_cast<std::size_t>(records_[i].channel) >= kChannelCount) {
      throw ValidationError("TimeTagStream: invalid channel");
    }
  }
}

std::vector<std::int64_t> TimeTagStream::channel_times(Channel c) const {
  std::vector<std::int64_t> out;
  for (const auto& r : records_) {
    if (r.channel == c) out.push_back(r.timestamp_ps);
  }
  return out;
}

std::array<std::size_t, kChannelCount> TimeTagStream::counts_per_channel() const {
  std::array<std::size_t, kChannelCount> n{};
  for (const auto& r : records_) ++n[static_cast<std::size_t>(r.channel)];
  return n;
}

}  // namespace qdb
