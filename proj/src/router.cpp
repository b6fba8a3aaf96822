#include "demapf/router.hpp"

#include <algorithm>

namespace demapf {

PrecedenceKey precedence_key(const Request& request) {
  return PrecedenceKey{request.speed, request.length, request.traveller};
}

PrecedenceKey precedence_key(const TravellerSpec& spec) {
  return PrecedenceKey{spec.speed, spec.length, spec.id};
}

namespace {

bool conflicts(const TimeSlot& a, const TimeSlot& b, Tick t_min) {
  return !(a.entry >= b.exit + t_min || b.entry >= a.exit + t_min);
}

bool fits(const TimeSlot& candidate, const std::vector<Reservation>& reserve, Tick t_min) {
  for (const Reservation& r : reserve)
    if (conflicts(candidate, r.slot, t_min)) return false;
  return true;
}

}  // namespace

RoundAllocation allocate_round(std::vector<Request> requests, Tick t_min) {
  for (size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].slot.duration() <= 0)
      throw ProtocolViolation("request with empty slot from " + requests[i].traveller);
    for (size_t j = i + 1; j < requests.size(); ++j)
      if (requests[i].traveller == requests[j].traveller)
        throw ProtocolViolation("two requests from " + requests[i].traveller +
                                " for one location in one round");
  }
  std::sort(requests.begin(), requests.end(),
            [](const Request& a, const Request& b) { return precedence_key(a) < precedence_key(b); });

  RoundAllocation out;
  for (const Request& request : requests) {
    const Tick duration = request.slot.duration();
    TimeSlot granted{request.slot.entry, request.slot.entry + duration};
    if (!fits(granted, out.reserve, t_min)) {
      // Candidate entries: the requested entry plus the first instant after
      // each reservation's headway; the earliest fitting one wins, so gaps
      // that pre-date later reservations are usable.
      std::vector<Tick> candidates;
      for (const Reservation& r : out.reserve) {
        Tick e = r.slot.exit + t_min;
        if (e > request.slot.entry) candidates.push_back(e);
      }
      std::sort(candidates.begin(), candidates.end());
      granted = TimeSlot{0, 0};
      for (Tick e : candidates) {
        TimeSlot candidate{e, e + duration};
        if (fits(candidate, out.reserve, t_min)) {
          granted = candidate;
          break;
        }
      }
      // A slot after the last reservation always fits, so granted is set.
    }
    out.proposals.emplace(request.traveller, granted);
    out.reserve.push_back({request.traveller, granted});
  }
  std::sort(out.reserve.begin(), out.reserve.end(), [](const Reservation& a, const Reservation& b) {
    return std::tie(a.slot.entry, a.traveller) < std::tie(b.slot.entry, b.traveller);
  });
  return out;
}

}  // namespace demapf
