#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "demapf/protocol.hpp"

namespace demapf {

// 4-byte big-endian length prefix + UTF-8 JSON body.
std::string encode_frame(const std::string& body);

// Incremental decoder for the framed stream.
class FrameDecoder {
 public:
  // Appends raw bytes; returns every body completed by them, in order.
  std::vector<std::string> feed(const char* data, std::size_t size);

 private:
  std::string buffer_;
};

std::string encode_message(const RoundMessage& msg);
RoundMessage decode_message(const std::string& body);

// Blocking stream-socket connection carrying framed messages. Any loss of the
// connection aborts the run: lossy channels are out of scope.
class TcpConnection {
 public:
  explicit TcpConnection(int fd);
  ~TcpConnection();
  TcpConnection(TcpConnection&&) noexcept;
  TcpConnection& operator=(TcpConnection&&) noexcept;
  TcpConnection(const TcpConnection&) = delete;
  TcpConnection& operator=(const TcpConnection&) = delete;

  void send(const RoundMessage& msg);
  RoundMessage recv();  // throws TransportError on EOF
  void close();

 private:
  int fd_ = -1;
  FrameDecoder decoder_;
  std::vector<std::string> pending_;
};

class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class TcpListener {
 public:
  // host:port; port 0 picks a free port.
  explicit TcpListener(const std::string& address);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  TcpConnection accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

TcpConnection tcp_connect(const std::string& address);

// Engine-side proxy for travellers hosted by a connected worker process.
class RemoteEndpoint : public TravellerEndpoint {
 public:
  RemoteEndpoint(TcpConnection connection, std::vector<std::string> traveller_ids);

  std::vector<std::string> traveller_ids() override;
  std::vector<RoundMessage> start() override;
  RoundMessage deliver(const RoundMessage& proposal) override;

 private:
  TcpConnection connection_;
  std::vector<std::string> ids_;
};

// Worker side: hosts the given travellers, answers the coordinator until it
// closes the connection.
void run_worker(TcpConnection connection, const RoadNetwork& net,
                std::vector<TravellerSpec> specs);

}  // namespace demapf
