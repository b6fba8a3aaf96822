#include "demapf/network.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "demapf/plan.hpp"

namespace demapf {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(current);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == '\t' || c == ' ') {
      if (!current.empty()) {
        fields.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) fields.push_back(current);
  return fields;
}

std::int64_t parse_int(const std::string& field, const std::string& what) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw ParseError("bad integer for " + what + ": '" + field + "'");
  return value;
}

}  // namespace

LocIndex RoadNetwork::add_node(const std::string& id, Dist length,
                               std::optional<Speed> speed_limit) {
  if (by_id_.count(id)) throw ParseError("duplicate location id: " + id);
  if (length < 0) throw ParseError("node length must be >= 0: " + id);
  if (speed_limit && *speed_limit <= 0) throw ParseError("speed limit must be > 0: " + id);
  Location loc;
  loc.id = id;
  loc.kind = LocKind::Node;
  loc.length = length;
  loc.speed_limit = speed_limit;
  auto index = static_cast<LocIndex>(locations_.size());
  locations_.push_back(std::move(loc));
  adjacency_.emplace_back();
  by_id_.emplace(id, index);
  ++node_count_;
  return index;
}

LocIndex RoadNetwork::add_edge(const std::string& id, LocIndex node_a, LocIndex node_b,
                               Dist length, std::optional<Speed> speed_limit) {
  if (by_id_.count(id)) throw ParseError("duplicate location id: " + id);
  if (length <= 0) throw ParseError("edge length must be > 0: " + id);
  if (speed_limit && *speed_limit <= 0) throw ParseError("speed limit must be > 0: " + id);
  for (LocIndex n : {node_a, node_b}) {
    if (n < 0 || static_cast<size_t>(n) >= locations_.size() ||
        locations_[static_cast<size_t>(n)].kind != LocKind::Node)
      throw ParseError("edge endpoint is not an existing node: " + id);
  }
  if (node_a == node_b) throw ParseError("edge endpoints must differ: " + id);
  Location loc;
  loc.id = id;
  loc.kind = LocKind::Edge;
  loc.length = length;
  loc.speed_limit = speed_limit;
  loc.endpoint_a = node_a;
  loc.endpoint_b = node_b;
  auto index = static_cast<LocIndex>(locations_.size());
  locations_.push_back(std::move(loc));
  adjacency_.emplace_back();

  auto link = [this](LocIndex a, LocIndex b) {
    auto& list = adjacency_[static_cast<size_t>(a)];
    list.insert(std::lower_bound(list.begin(), list.end(), b), b);
  };
  link(node_a, index);
  link(node_b, index);
  link(index, node_a);
  link(index, node_b);
  by_id_.emplace(id, index);
  return index;
}

bool RoadNetwork::is_adjacent(LocIndex a, LocIndex b) const {
  auto list = adjacent(a);
  return std::binary_search(list.begin(), list.end(), b);
}

LocIndex RoadNetwork::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ParseError("unknown location id: " + id);
  return it->second;
}

std::optional<LocIndex> RoadNetwork::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

RoadNetwork parse_map(const std::string& text, const WorldConfig& cfg) {
  cfg.validate();
  auto lines = split_lines(text);
  if (lines.size() < 4) throw ParseError("malformed header: fewer than 4 header lines");

  auto header_value = [&](size_t i, const std::string& key) -> std::string {
    auto fields = split_fields(lines[i]);
    if (fields.size() != 2 || fields[0] != key)
      throw ParseError("malformed header: expected '" + key + " <value>' on line " +
                       std::to_string(i + 1));
    return fields[1];
  };

  auto type_fields = split_fields(lines[0]);
  if (type_fields.empty() || type_fields[0] != "type")
    throw ParseError("malformed header: missing 'type' line");
  std::int64_t height = parse_int(header_value(1, "height"), "height");
  std::int64_t width = parse_int(header_value(2, "width"), "width");
  if (height <= 0 || width <= 0) throw ParseError("malformed header: non-positive dimensions");
  if (split_fields(lines[3]) != std::vector<std::string>{"map"})
    throw ParseError("malformed header: missing 'map' line");
  if (static_cast<std::int64_t>(lines.size()) - 4 < height)
    throw ParseError("map body has fewer rows than header height");

  auto passable = [](char c) { return c == '.' || c == 'G'; };
  auto blocked = [](char c) { return c == '@' || c == 'T' || c == 'O'; };

  RoadNetwork net;
  std::vector<LocIndex> node_at(static_cast<size_t>(height * width), kNoLocation);
  auto cell = [&](std::int64_t r, std::int64_t c) -> LocIndex& {
    return node_at[static_cast<size_t>(r * width + c)];
  };

  for (std::int64_t r = 0; r < height; ++r) {
    const std::string& row = lines[static_cast<size_t>(4 + r)];
    if (static_cast<std::int64_t>(row.size()) != width)
      throw ParseError("row length mismatch at map row " + std::to_string(r));
    for (std::int64_t c = 0; c < width; ++c) {
      char ch = row[static_cast<size_t>(c)];
      if (passable(ch)) {
        cell(r, c) = net.add_node("n" + std::to_string(r) + "_" + std::to_string(c),
                                  cfg.node_length, cfg.default_speed_limit);
      } else if (!blocked(ch)) {
        throw ParseError(std::string("unknown map cell '") + ch + "' at row " +
                         std::to_string(r));
      }
    }
  }
  if (net.node_count() == 0) throw ParseError("map has zero passable cells");

  auto edge_id = [](std::int64_t r0, std::int64_t c0, std::int64_t r1, std::int64_t c1) {
    return "e" + std::to_string(r0) + "_" + std::to_string(c0) + "-" + std::to_string(r1) +
           "_" + std::to_string(c1);
  };
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      if (cell(r, c) == kNoLocation) continue;
      if (c + 1 < width && cell(r, c + 1) != kNoLocation)
        net.add_edge(edge_id(r, c, r, c + 1), cell(r, c), cell(r, c + 1), cfg.edge_length,
                     cfg.default_speed_limit);
      if (r + 1 < height && cell(r + 1, c) != kNoLocation)
        net.add_edge(edge_id(r, c, r + 1, c), cell(r, c), cell(r + 1, c), cfg.edge_length,
                     cfg.default_speed_limit);
    }
  }
  return net;
}

std::vector<TravellerSpec> parse_scenario(const std::string& text, const RoadNetwork& net) {
  auto lines = split_lines(text);
  std::vector<TravellerSpec> specs;
  size_t first = 0;
  if (!lines.empty()) {
    auto fields = split_fields(lines[0]);
    if (!fields.empty() && fields[0] == "version") first = 1;
  }
  for (size_t i = first; i < lines.size(); ++i) {
    auto fields = split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() != 12)
      throw ParseError("scenario row " + std::to_string(i) + " has " +
                       std::to_string(fields.size()) + " fields, expected 12");
    TravellerSpec spec;
    spec.id = "t" + std::to_string(specs.size());
    std::int64_t sx = parse_int(fields[4], "sx");
    std::int64_t sy = parse_int(fields[5], "sy");
    std::int64_t gx = parse_int(fields[6], "gx");
    std::int64_t gy = parse_int(fields[7], "gy");
    // fields[8] (base cost) is informational; real benchmark files carry floats.
    spec.length = parse_int(fields[9], "length");
    spec.speed = parse_int(fields[10], "speed");
    spec.depart_not_before = parse_int(fields[11], "depart_time");

    auto node_id = [](std::int64_t x, std::int64_t y) {
      return "n" + std::to_string(y) + "_" + std::to_string(x);
    };
    auto src = net.find(node_id(sx, sy));
    if (!src)
      throw ParseError("scenario row " + std::to_string(i) + ": start (" + fields[4] + "," +
                       fields[5] + ") is not a passable cell");
    auto dst = net.find(node_id(gx, gy));
    if (!dst)
      throw ParseError("scenario row " + std::to_string(i) + ": goal (" + fields[6] + "," +
                       fields[7] + ") is not a passable cell");
    spec.source = net.location(*src).id;
    spec.destination = net.location(*dst).id;
    spec.validate();
    specs.push_back(std::move(spec));
  }
  validate_specs(specs, net);
  return specs;
}

void validate_specs(const std::vector<TravellerSpec>& specs, const RoadNetwork& net) {
  std::vector<std::string> ids;
  for (const auto& spec : specs) {
    spec.validate();
    ids.push_back(spec.id);
    for (const std::string& endpoint : {spec.source, spec.destination}) {
      LocIndex i = net.index_of(endpoint);
      if (net.location(i).kind != LocKind::Node)
        throw ParseError("traveller " + spec.id + " endpoint is not a node: " + endpoint);
    }
  }
  std::sort(ids.begin(), ids.end());
  auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) throw ParseError("duplicate traveller id: " + *dup);
}

std::optional<std::vector<LocIndex>> shortest_path(const RoadNetwork& net, LocIndex from,
                                                   LocIndex to, const TravellerSpec& spec) {
  constexpr Tick kInf = std::numeric_limits<Tick>::max();
  const auto n = net.size();
  // dist[l] = least duration of a path l..to, inclusive of both ends.
  std::vector<Tick> dist(n, kInf);
  using Item = std::pair<Tick, LocIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[static_cast<size_t>(to)] = traversal_duration(spec, net.location(to));
  queue.emplace(dist[static_cast<size_t>(to)], to);
  while (!queue.empty()) {
    auto [d, l] = queue.top();
    queue.pop();
    if (d != dist[static_cast<size_t>(l)]) continue;
    for (LocIndex m : net.adjacent(l)) {
      Tick nd = d + traversal_duration(spec, net.location(m));
      if (nd < dist[static_cast<size_t>(m)]) {
        dist[static_cast<size_t>(m)] = nd;
        queue.emplace(nd, m);
      }
    }
  }
  if (dist[static_cast<size_t>(from)] == kInf) return std::nullopt;

  // Greedy walk toward the goal picking the smallest feasible index yields the
  // lexicographically smallest index sequence among minimal paths.
  std::vector<LocIndex> path{from};
  LocIndex current = from;
  while (current != to) {
    Tick remaining = dist[static_cast<size_t>(current)] -
                     traversal_duration(spec, net.location(current));
    LocIndex next = kNoLocation;
    for (LocIndex m : net.adjacent(current)) {
      if (dist[static_cast<size_t>(m)] == remaining) {
        next = m;
        break;
      }
    }
    if (next == kNoLocation) return std::nullopt;  // unreachable by construction
    path.push_back(next);
    current = next;
  }
  return path;
}

std::string net_to_json(const RoadNetwork& net) {
  ordered_json nodes = ordered_json::array();
  ordered_json edges = ordered_json::array();
  for (size_t i = 0; i < net.size(); ++i) {
    const Location& loc = net.location(static_cast<LocIndex>(i));
    ordered_json entry;
    entry["id"] = loc.id;
    entry["length"] = loc.length;
    if (loc.speed_limit)
      entry["speed_limit"] = *loc.speed_limit;
    else
      entry["speed_limit"] = nullptr;
    if (loc.kind == LocKind::Node) {
      nodes.push_back(std::move(entry));
    } else {
      entry["endpoints"] = {net.location(loc.endpoint_a).id, net.location(loc.endpoint_b).id};
      edges.push_back(std::move(entry));
    }
  }
  ordered_json out;
  out["nodes"] = std::move(nodes);
  out["edges"] = std::move(edges);
  return out.dump(2);
}

RoadNetwork net_from_json(const std::string& json_text) {
  ordered_json in = ordered_json::parse(json_text);
  RoadNetwork net;
  auto limit_of = [](const ordered_json& entry) -> std::optional<Speed> {
    if (!entry.contains("speed_limit") || entry["speed_limit"].is_null()) return std::nullopt;
    return entry["speed_limit"].get<Speed>();
  };
  for (const auto& entry : in.at("nodes"))
    net.add_node(entry.at("id").get<std::string>(), entry.at("length").get<Dist>(),
                 limit_of(entry));
  for (const auto& entry : in.at("edges")) {
    const auto& endpoints = entry.at("endpoints");
    net.add_edge(entry.at("id").get<std::string>(),
                 net.index_of(endpoints.at(0).get<std::string>()),
                 net.index_of(endpoints.at(1).get<std::string>()),
                 entry.at("length").get<Dist>(), limit_of(entry));
  }
  return net;
}

}  // namespace demapf
