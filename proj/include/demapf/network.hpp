#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "demapf/types.hpp"

namespace demapf {

enum class LocKind { Node, Edge };

// One schedulable resource of the road network. Nodes and edges are both
// first-class locations; an edge knows its two endpoint nodes.
struct Location {
  std::string id;
  LocKind kind = LocKind::Node;
  Dist length = 0;
  std::optional<Speed> speed_limit;  // nullopt = unbounded
  LocIndex endpoint_a = kNoLocation;  // Edge only
  LocIndex endpoint_b = kNoLocation;  // Edge only
};

class RoadNetwork {
 public:
  LocIndex add_node(const std::string& id, Dist length = 0,
                    std::optional<Speed> speed_limit = std::nullopt);
  LocIndex add_edge(const std::string& id, LocIndex node_a, LocIndex node_b,
                    Dist length, std::optional<Speed> speed_limit = std::nullopt);

  const Location& location(LocIndex i) const { return locations_.at(static_cast<size_t>(i)); }
  std::size_t size() const { return locations_.size(); }
  std::size_t node_count() const { return node_count_; }
  std::size_t edge_count() const { return locations_.size() - node_count_; }

  // Adjacent location indices, sorted ascending.
  std::span<const LocIndex> adjacent(LocIndex i) const {
    return adjacency_.at(static_cast<size_t>(i));
  }
  bool is_adjacent(LocIndex a, LocIndex b) const;

  LocIndex index_of(const std::string& id) const;             // throws ParseError
  std::optional<LocIndex> find(const std::string& id) const;  // nullopt if absent

 private:
  std::vector<Location> locations_;
  std::vector<std::vector<LocIndex>> adjacency_;
  std::unordered_map<std::string, LocIndex> by_id_;
  std::size_t node_count_ = 0;
};

// MovingAI grid map -> road network. One node per passable cell ('.'/'G'),
// one edge per 4-connected passable pair. Ids derive from (row, col):
// "n<r>_<c>" and "e<r>_<c>-<r'>_<c'>".
RoadNetwork parse_map(const std::string& text, const WorldConfig& cfg);

// Extended MovingAI scenario: bucket, map, width, height, sx, sy, gx, gy,
// base_cost, length, speed, depart_time (tab separated; optional leading
// "version" line). (sx, sy) are (col, row). Ids are "t<row ordinal>".
std::vector<TravellerSpec> parse_scenario(const std::string& text, const RoadNetwork& net);

// Rejects duplicate ids and specs whose endpoints are missing or non-node.
void validate_specs(const std::vector<TravellerSpec>& specs, const RoadNetwork& net);

// Minimal cumulative traversal-duration path between two nodes for the given
// traveller, alternating node/edge. Ties break toward the lexicographically
// smallest index sequence. nullopt when unreachable.
std::optional<std::vector<LocIndex>> shortest_path(const RoadNetwork& net, LocIndex from,
                                                   LocIndex to, const TravellerSpec& spec);

std::string net_to_json(const RoadNetwork& net);
RoadNetwork net_from_json(const std::string& json_text);

}  // namespace demapf
