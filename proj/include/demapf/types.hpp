#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace demapf {

using Tick = std::int64_t;
using Dist = std::int64_t;
using Speed = std::int64_t;
using LocIndex = std::int32_t;

inline constexpr LocIndex kNoLocation = -1;

// Input that cannot be parsed or fails its declared preconditions.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// A message that breaks the negotiation contract (wrong locations, early
// proposals, out-of-order rounds, ...).
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what) : std::runtime_error(what) {}
};

inline Tick ceil_div(Tick numerator, Tick denominator) {
  return (numerator + denominator - 1) / denominator;
}

// Half-open occupancy window [entry, exit).
struct TimeSlot {
  Tick entry = 0;
  Tick exit = 0;

  Tick duration() const { return exit - entry; }
  bool operator==(const TimeSlot& other) const = default;
};

struct WorldConfig {
  Dist edge_length = 10;
  Dist node_length = 0;
  Tick t_min = 1;
  std::optional<Speed> default_speed_limit;  // nullopt = unbounded

  void validate() const {
    if (edge_length <= 0) throw ParseError("edge_length must be > 0");
    if (node_length < 0) throw ParseError("node_length must be >= 0");
    if (t_min < 0) throw ParseError("t_min must be >= 0");
    if (default_speed_limit && *default_speed_limit <= 0)
      throw ParseError("default_speed_limit must be > 0");
  }
};

struct TravellerSpec {
  std::string id;
  Dist length = 1;
  Speed speed = 1;
  std::string source;       // node id
  std::string destination;  // node id
  Tick depart_not_before = 0;

  void validate() const {
    if (id.empty()) throw ParseError("traveller id must be non-empty");
    if (length <= 0) throw ParseError("traveller length must be > 0: " + id);
    if (speed <= 0) throw ParseError("traveller speed must be > 0: " + id);
    if (depart_not_before < 0) throw ParseError("depart time must be >= 0: " + id);
    if (source == destination)
      throw ParseError("source must differ from destination: " + id);
  }
};

}  // namespace demapf
