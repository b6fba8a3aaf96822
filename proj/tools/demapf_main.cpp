#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "demapf/baselines.hpp"
#include "demapf/network.hpp"
#include "demapf/plan.hpp"
#include "demapf/protocol.hpp"
#include "demapf/transport.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace demapf;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << content;
}

struct RunConfig {
  WorldConfig world;
  std::optional<std::int64_t> max_rounds;
  std::string transport_mode = "local";
  std::string listen;
  std::string connect;
  bool seedless = true;
};

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  ordered_json in = ordered_json::parse(read_file(path));
  if (in.contains("t_min")) cfg.world.t_min = in["t_min"].get<Tick>();
  if (in.contains("edge_length")) cfg.world.edge_length = in["edge_length"].get<Dist>();
  if (in.contains("node_length")) cfg.world.node_length = in["node_length"].get<Dist>();
  if (in.contains("default_speed_limit") && !in["default_speed_limit"].is_null())
    cfg.world.default_speed_limit = in["default_speed_limit"].get<Speed>();
  if (in.contains("max_rounds")) cfg.max_rounds = in["max_rounds"].get<std::int64_t>();
  if (in.contains("transport")) {
    const auto& t = in["transport"];
    if (t.contains("mode")) cfg.transport_mode = t["mode"].get<std::string>();
    if (t.contains("listen")) cfg.listen = t["listen"].get<std::string>();
    if (t.contains("connect")) cfg.connect = t["connect"].get<std::string>();
  }
  if (in.contains("seedless")) cfg.seedless = in["seedless"].get<bool>();
  cfg.world.validate();
  return cfg;
}

// Peak RSS in kilobytes, as a coarse memory proxy. Falls back to current RSS
// on kernels that do not report a high-water mark.
std::int64_t peak_rss_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  std::int64_t current = 0;
  while (std::getline(status, line)) {
    std::int64_t kb = 0;
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream(line.substr(6)) >> kb;
      return kb;
    }
    if (line.rfind("VmRSS:", 0) == 0) std::istringstream(line.substr(6)) >> current;
  }
  return current;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

Tick makespan_of(const SolutionSet& solution) {
  Tick makespan = 0;
  for (const Plan& plan : solution.plans)
    if (!plan.steps.empty()) makespan = std::max(makespan, plan.steps.back().slot.exit);
  return makespan;
}

void append_metrics(const fs::path& out_dir, const std::string& scenario, std::size_t travellers,
                    std::int64_t rounds, Tick cost, Tick makespan, std::size_t ct_nodes,
                    std::size_t messages, std::int64_t wall_ms) {
  fs::path path = out_dir / "metrics.csv";
  bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh)
    out << "scenario,n_travellers,rounds,total_cost,makespan,ct_nodes_expanded,messages_sent,"
           "wall_ms,peak_alloc_estimate\n";
  out << scenario << ',' << travellers << ',' << rounds << ',' << cost << ',' << makespan << ','
      << ct_nodes << ',' << messages << ',' << wall_ms << ',' << peak_rss_kb() << '\n';
}

int cmd_run(const std::string& map_path, const std::string& scen_path,
            const std::string& config_path, const std::string& transport_flag,
            const std::string& listen_flag, const std::string& out_dir_flag,
            const std::string& solver, std::optional<std::int64_t> max_rounds_flag,
            const std::vector<std::string>& remote_groups, bool trace) {
  RunConfig cfg;
  RoadNetwork net;
  std::vector<TravellerSpec> specs;
  std::string scenario_name;
  try {
    cfg = load_config(config_path);
    if (!transport_flag.empty()) cfg.transport_mode = transport_flag;
    if (!listen_flag.empty()) cfg.listen = listen_flag;
    if (max_rounds_flag) cfg.max_rounds = max_rounds_flag;
    net = parse_map(read_file(map_path), cfg.world);
    specs = parse_scenario(read_file(scen_path), net);
    scenario_name = fs::path(scen_path).stem().string();
    if (specs.empty()) throw ParseError("scenario has no travellers");
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }

  fs::path out_dir = out_dir_flag.empty() ? fs::path(".") : fs::path(out_dir_flag);
  fs::create_directories(out_dir);

  try {
    auto started = std::chrono::steady_clock::now();
    if (solver == "priority") {
      BaselineResult result = priority_plan(specs, net, cfg.world);
      auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started)
                         .count();
      if (!result.ok()) {
        std::cerr << "priority planner failed: " << result.failure << "\n";
        return 2;
      }
      write_file(out_dir / "solution.json", solution_to_json(*result.solution, net));
      append_metrics(out_dir, scenario_name, specs.size(), 0, result.solution->cost,
                     makespan_of(*result.solution), 0, 0, wall_ms);
      return 0;
    }
    if (solver != "demapf") {
      std::cerr << "input error: unknown solver " << solver << "\n";
      return 1;
    }

    std::vector<std::unique_ptr<TravellerEndpoint>> endpoints;
    LocalEndpoint* local = nullptr;
    if (cfg.transport_mode == "tcp") {
      std::set<std::string> remote_ids;
      TcpListener listener(cfg.listen.empty() ? "127.0.0.1:0" : cfg.listen);
      std::cout << "listening " << listener.port() << std::endl;
      for (const std::string& group : remote_groups) {
        std::vector<std::string> ids = split_csv(group);
        remote_ids.insert(ids.begin(), ids.end());
        endpoints.push_back(std::make_unique<RemoteEndpoint>(listener.accept(), std::move(ids)));
      }
      std::vector<TravellerSpec> local_specs;
      for (const auto& spec : specs)
        if (!remote_ids.count(spec.id)) local_specs.push_back(spec);
      if (!local_specs.empty()) {
        auto endpoint = std::make_unique<LocalEndpoint>(net, std::move(local_specs));
        local = endpoint.get();
        endpoints.push_back(std::move(endpoint));
      }
    } else if (cfg.transport_mode == "local") {
      auto endpoint = std::make_unique<LocalEndpoint>(net, specs);
      local = endpoint.get();
      endpoints.push_back(std::move(endpoint));
    } else {
      std::cerr << "input error: unknown transport " << cfg.transport_mode << "\n";
      return 1;
    }

    Engine engine(net, cfg.world, specs, std::move(endpoints), cfg.max_rounds);
    if (trace) engine.set_trace(&std::cerr);
    EngineResult result = engine.run_to_convergence();
    auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();

    write_file(out_dir / "solution.json", solution_to_json(result.solution, net));
    append_metrics(out_dir, scenario_name, specs.size(), result.rounds, result.solution.cost,
                   makespan_of(result.solution), result.counters.ct_nodes_explored,
                   result.counters.messages_sent, wall_ms);
    if (trace && local) {
      for (const auto& spec : specs)
        if (const Traveller* t = local->traveller(spec.id))
          write_file(out_dir / ("ct_" + spec.id + ".json"), t->ct_to_json(net));
    }

    if (!result.converged()) {
      std::cerr << "run did not converge ("
                << (result.status == EngineResult::Status::AgentFailed ? "agent failed"
                                                                       : "round limit")
                << ") after " << result.rounds << " rounds\n";
      for (const TravellerReport& r : result.travellers) {
        const char* status = r.status == TravellerStatus::PlanFound  ? "plan_found"
                             : r.status == TravellerStatus::Failed   ? "failed"
                                                                     : "negotiating";
        std::cerr << "  " << r.id << ": " << status << " (ct_nodes=" << r.ct_nodes_explored
                  << ")\n";
      }
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 2;
  }
}

int cmd_verify(const std::string& solution_path, const std::string& map_path,
               const std::string& scen_path, const std::string& config_path) {
  RunConfig cfg;
  RoadNetwork net;
  std::vector<TravellerSpec> specs;
  SolutionSet solution;
  try {
    cfg = load_config(config_path);
    net = parse_map(read_file(map_path), cfg.world);
    specs = parse_scenario(read_file(scen_path), net);
    solution = solution_from_json(read_file(solution_path), net);
    std::set<std::string> known;
    for (const auto& spec : specs) known.insert(spec.id);
    for (const Plan& plan : solution.plans)
      if (!known.count(plan.traveller))
        throw ParseError("solution references unknown traveller: " + plan.traveller);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }

  ValidationResult result = validate_solution(solution, specs, net, cfg.world);
  if (result.valid()) {
    std::cout << "valid\n";
    return 0;
  }
  if (result.conflict) {
    std::cout << "conflict on " << net.location(result.conflict->loc).id << " between "
              << result.conflict->traveller_a << " (" << result.conflict->slot_a.entry << ","
              << result.conflict->slot_a.exit << ") and " << result.conflict->traveller_b << " ("
              << result.conflict->slot_b.entry << "," << result.conflict->slot_b.exit << ")\n";
  } else {
    std::cout << "invalid: " << result.error << "\n";
  }
  return 2;
}

int cmd_bench(const std::string& suite_dir, const std::string& solvers_flag, int repeat,
              const std::string& config_path) {
  std::vector<std::string> solvers = split_csv(solvers_flag);
  std::vector<fs::path> scen_files;
  try {
    for (const auto& entry : fs::directory_iterator(suite_dir))
      if (entry.path().extension() == ".scen") scen_files.push_back(entry.path());
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }
  std::sort(scen_files.begin(), scen_files.end());

  std::cout << "scenario,solver,status,cost,rounds,wall_ms_median,repeats\n";
  for (const fs::path& scen_path : scen_files) {
    fs::path map_path = scen_path;
    map_path.replace_extension(".map");
    RunConfig cfg;
    RoadNetwork net;
    std::vector<TravellerSpec> specs;
    try {
      cfg = load_config(config_path);
      net = parse_map(read_file(map_path), cfg.world);
      specs = parse_scenario(read_file(scen_path), net);
    } catch (const std::exception& e) {
      std::cerr << "skipping " << scen_path.string() << ": " << e.what() << "\n";
      continue;
    }
    const std::string name = scen_path.stem().string();
    for (const std::string& solver : solvers) {
      std::vector<std::int64_t> wall;
      std::optional<Tick> cost;
      std::int64_t rounds = 0;
      std::string status = "ok";
      for (int i = 0; i < repeat && status == "ok"; ++i) {
        auto started = std::chrono::steady_clock::now();
        try {
          std::optional<Tick> run_cost;
          if (solver == "demapf") {
            EngineResult result = solve(net, cfg.world, specs, cfg.max_rounds);
            if (result.converged()) {
              run_cost = result.solution.cost;
              rounds = result.rounds;
            } else {
              status = "failed";
            }
          } else if (solver == "priority") {
            BaselineResult result = priority_plan(specs, net, cfg.world);
            if (result.ok())
              run_cost = result.solution->cost;
            else
              status = "failed";
          } else if (solver == "oracle") {
            BaselineResult result = brute_force_optimal(specs, net, cfg.world);
            if (result.ok())
              run_cost = result.solution->cost;
            else
              status = "failed";
          } else {
            std::cerr << "input error: unknown solver " << solver << "\n";
            return 1;
          }
          if (run_cost) {
            if (cost && *cost != *run_cost) status = "nondeterministic";
            cost = run_cost;
          }
        } catch (const std::invalid_argument&) {
          status = "skipped(size)";
        }
        wall.push_back(std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count());
      }
      std::sort(wall.begin(), wall.end());
      std::int64_t median = wall.empty() ? 0 : wall[wall.size() / 2];
      std::cout << name << ',' << solver << ',' << status << ','
                << (cost && status == "ok" ? std::to_string(*cost) : "") << ','
                << (solver == "demapf" && status == "ok" ? std::to_string(rounds) : "") << ','
                << median << ',' << repeat << '\n';
    }
  }
  return 0;
}

int cmd_worker(const std::string& connect, const std::string& map_path,
               const std::string& scen_path, const std::string& config_path,
               const std::string& travellers_flag) {
  try {
    RunConfig cfg = load_config(config_path);
    RoadNetwork net = parse_map(read_file(map_path), cfg.world);
    std::vector<TravellerSpec> all = parse_scenario(read_file(scen_path), net);
    std::set<std::string> wanted;
    for (const std::string& id : split_csv(travellers_flag)) wanted.insert(id);
    std::vector<TravellerSpec> mine;
    for (const auto& spec : all)
      if (wanted.count(spec.id)) mine.push_back(spec);
    if (mine.size() != wanted.size()) throw ParseError("unknown traveller in --travellers");
    run_worker(tcp_connect(connect), net, std::move(mine));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "worker failed: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeMAPF: decentralised multi-agent path finding for spatially extended agents"};
  app.require_subcommand(1);

  std::string map_path, scen_path, config_path, solution_path, out_dir, listen, connect;
  std::string transport, solver = "demapf", solvers = "demapf,priority", travellers, suite_dir;
  std::vector<std::string> remote_groups;
  std::optional<std::int64_t> max_rounds;
  bool trace = false;
  int repeat = 1;

  CLI::App* run = app.add_subcommand("run", "negotiate plans for a scenario");
  run->add_option("--map", map_path)->required();
  run->add_option("--scen", scen_path)->required();
  run->add_option("--config", config_path);
  run->add_option("--transport", transport)->check(CLI::IsMember({"local", "tcp"}));
  run->add_option("--listen", listen);
  run->add_option("--remote", remote_groups,
                  "traveller ids hosted by one worker (repeatable, connection order)");
  run->add_option("--out-dir", out_dir);
  run->add_option("--solver", solver)->check(CLI::IsMember({"demapf", "priority"}));
  run->add_option("--max-rounds", max_rounds);
  run->add_flag("--trace", trace);

  CLI::App* verify = app.add_subcommand("verify", "check a solution for conflicts");
  verify->add_option("--solution", solution_path)->required();
  verify->add_option("--map", map_path)->required();
  verify->add_option("--scen", scen_path)->required();
  verify->add_option("--config", config_path);

  CLI::App* bench = app.add_subcommand("bench", "compare solvers over a fixture directory");
  bench->add_option("--suite", suite_dir)->required();
  bench->add_option("--solvers", solvers);
  bench->add_option("--repeat", repeat)->check(CLI::PositiveNumber);
  bench->add_option("--config", config_path);

  CLI::App* worker = app.add_subcommand("worker", "host travellers for a remote coordinator");
  worker->add_option("--connect", connect)->required();
  worker->add_option("--map", map_path)->required();
  worker->add_option("--scen", scen_path)->required();
  worker->add_option("--config", config_path);
  worker->add_option("--travellers", travellers)->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(map_path, scen_path, config_path, transport, listen, out_dir, solver,
                   max_rounds, remote_groups, trace);
  if (verify->parsed()) return cmd_verify(solution_path, map_path, scen_path, config_path);
  if (bench->parsed()) return cmd_bench(suite_dir, solvers, repeat, config_path);
  if (worker->parsed()) return cmd_worker(connect, map_path, scen_path, config_path, travellers);
  return 1;
}
