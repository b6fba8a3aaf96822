#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "demapf/transport.hpp"

using namespace demapf;

namespace {

RoundMessage sample_message() {
  RoundMessage msg;
  msg.kind = MessageKind::AllocationProposal;
  msg.round = 7;
  msg.sender = "engine";
  msg.recipient = "t3";
  msg.payload["slots"] = nlohmann::ordered_json::array();
  msg.payload["slots"].push_back({{"loc", "e0_0-0_1"}, {"entry", 4}, {"exit", 9}});
  msg.payload["process"] = true;
  return msg;
}

}  // namespace

TEST_CASE("frame codec: byte-identical payload after decode") {
  std::string body = message_to_wire(sample_message()).dump();
  std::string frame = encode_frame(body);
  REQUIRE(frame.size() == body.size() + 4);

  FrameDecoder decoder;
  SUBCASE("single feed") {
    auto out = decoder.feed(frame.data(), frame.size());
    REQUIRE(out.size() == 1);
    CHECK(out[0] == body);
  }
  SUBCASE("byte-by-byte feed") {
    std::vector<std::string> out;
    for (char c : frame) {
      auto step = decoder.feed(&c, 1);
      out.insert(out.end(), step.begin(), step.end());
    }
    REQUIRE(out.size() == 1);
    CHECK(out[0] == body);
  }
  SUBCASE("two frames in one feed") {
    std::string both = frame + frame;
    auto out = decoder.feed(both.data(), both.size());
    REQUIRE(out.size() == 2);
    CHECK(out[0] == body);
    CHECK(out[1] == body);
  }
}

TEST_CASE("frame codec rejects oversized frames") {
  FrameDecoder decoder;
  const char huge[4] = {'\x7f', '\xff', '\xff', '\xff'};
  CHECK_THROWS_AS(decoder.feed(huge, 4), TransportError);
}

TEST_CASE("message encode/decode round trip") {
  RoundMessage msg = sample_message();
  std::string frame = encode_message(msg);
  FrameDecoder decoder;
  auto bodies = decoder.feed(frame.data(), frame.size());
  REQUIRE(bodies.size() == 1);
  RoundMessage back = decode_message(bodies[0]);
  CHECK(back.round == msg.round);
  CHECK(back.sender == msg.sender);
  CHECK(back.recipient == msg.recipient);
  CHECK(back.payload == msg.payload);
}

TEST_CASE("mixed local and remote endpoints reproduce the local solution") {
  RoadNetwork net;
  LocIndex n0 = net.add_node("n0", 5);
  LocIndex n1 = net.add_node("n1", 5);
  LocIndex n2 = net.add_node("n2", 5);
  net.add_edge("e01", n0, n1, 10);
  net.add_edge("e12", n1, n2, 10);
  WorldConfig cfg;
  std::vector<TravellerSpec> specs{{"a", 1, 4, "n0", "n2", 0},
                                   {"b", 2, 2, "n0", "n2", 0},
                                   {"c", 1, 1, "n2", "n0", 1},
                                   {"d", 3, 3, "n1", "n0", 2}};

  EngineResult local = solve(net, cfg, specs);
  REQUIRE(local.converged());

  TcpListener listener("127.0.0.1:0");
  std::thread worker([&] {
    std::vector<TravellerSpec> hosted{specs[1], specs[2]};  // b and c
    run_worker(tcp_connect("127.0.0.1:" + std::to_string(listener.port())), net,
               std::move(hosted));
  });
  EngineResult mixed;
  {
    std::vector<std::unique_ptr<TravellerEndpoint>> endpoints;
    endpoints.push_back(
        std::make_unique<RemoteEndpoint>(listener.accept(), std::vector<std::string>{"b", "c"}));
    endpoints.push_back(
        std::make_unique<LocalEndpoint>(net, std::vector<TravellerSpec>{specs[0], specs[3]}));
    Engine engine(net, cfg, specs, std::move(endpoints));
    mixed = engine.run_to_convergence();
  }  // dropping the engine closes the connection and releases the worker
  worker.join();
  REQUIRE(mixed.converged());
  CHECK(solution_to_json(mixed.solution, net) == solution_to_json(local.solution, net));
  CHECK(mixed.rounds == local.rounds);
}

TEST_CASE("a remote traveller failing at start aborts the run cleanly") {
  RoadNetwork net;
  net.add_node("n0");
  net.add_node("n1");
  net.add_node("iso");
  net.add_edge("e01", 0, 1, 10);
  WorldConfig cfg;
  std::vector<TravellerSpec> specs{{"ok", 1, 2, "n0", "n1", 0}, {"stuck", 1, 1, "n0", "iso", 0}};

  TcpListener listener("127.0.0.1:0");
  std::thread worker([&] {
    run_worker(tcp_connect("127.0.0.1:" + std::to_string(listener.port())), net,
               std::vector<TravellerSpec>{specs[1]});
  });
  EngineResult result;
  {
    std::vector<std::unique_ptr<TravellerEndpoint>> endpoints;
    endpoints.push_back(
        std::make_unique<RemoteEndpoint>(listener.accept(), std::vector<std::string>{"stuck"}));
    endpoints.push_back(
        std::make_unique<LocalEndpoint>(net, std::vector<TravellerSpec>{specs[0]}));
    Engine engine(net, cfg, specs, std::move(endpoints));
    result = engine.run_to_convergence();
  }
  worker.join();
  CHECK(result.status == EngineResult::Status::AgentFailed);
  CHECK(result.rounds == 0);
}

TEST_CASE("loopback tcp carries framed messages both ways") {
  TcpListener listener("127.0.0.1:0");
  RoundMessage msg = sample_message();

  std::thread client([&] {
    TcpConnection connection = tcp_connect("127.0.0.1:" + std::to_string(listener.port()));
    RoundMessage got = connection.recv();
    got.round += 1;
    got.sender = "t3";
    got.recipient = "engine";
    connection.send(got);
  });

  TcpConnection server = listener.accept();
  server.send(msg);
  RoundMessage reply = server.recv();
  CHECK(reply.round == msg.round + 1);
  CHECK(reply.payload == msg.payload);
  client.join();

  CHECK_THROWS_AS(server.recv(), TransportError);  // peer closed
}
