#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "demapf/types.hpp"

namespace demapf {

// One traveller's claim on one location for one round.
struct Request {
  std::string traveller;
  TimeSlot slot;
  Speed speed = 1;
  Dist length = 1;
};

// Total order shared by every router: speed descending, length descending,
// traveller id ascending. Smaller key = higher precedence.
struct PrecedenceKey {
  Speed speed = 0;
  Dist length = 0;
  std::string traveller;

  bool operator<(const PrecedenceKey& other) const {
    return std::tie(other.speed, other.length, traveller) <
           std::tie(speed, length, other.traveller);
  }
  bool operator==(const PrecedenceKey&) const = default;
};

PrecedenceKey precedence_key(const Request& request);
PrecedenceKey precedence_key(const TravellerSpec& spec);

struct Reservation {
  std::string traveller;
  TimeSlot slot;
};

struct RoundAllocation {
  std::map<std::string, TimeSlot> proposals;   // traveller id -> proposed slot
  std::vector<Reservation> reserve;            // ordered by entry time
};

// Algorithm-2 allocation for one location and one round. Requests are served
// in precedence order; a non-conflicting request is granted verbatim, anything
// else gets the earliest slot with entry >= requested entry and identical
// duration. Conflict between slots a and b:
//   NOT (a.entry >= b.exit + t_min  OR  b.entry >= a.exit + t_min).
// Pure function of the request multiset.
RoundAllocation allocate_round(std::vector<Request> requests, Tick t_min);

}  // namespace demapf
