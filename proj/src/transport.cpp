#include "demapf/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

namespace demapf {

namespace {

constexpr std::size_t kMaxFrame = 16u << 20;

std::pair<std::string, std::string> split_address(const std::string& address) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos)
    throw TransportError("address must be host:port: " + address);
  return {address.substr(0, colon), address.substr(colon + 1)};
}

}  // namespace

std::string encode_frame(const std::string& body) {
  if (body.size() > kMaxFrame) throw TransportError("frame too large");
  std::string out;
  out.reserve(body.size() + 4);
  auto n = static_cast<std::uint32_t>(body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

std::vector<std::string> FrameDecoder::feed(const char* data, std::size_t size) {
  buffer_.append(data, size);
  std::vector<std::string> out;
  while (buffer_.size() >= 4) {
    auto b = [&](size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
    std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
    if (n > kMaxFrame) throw TransportError("frame exceeds size limit");
    if (buffer_.size() < 4 + n) break;
    out.push_back(buffer_.substr(4, n));
    buffer_.erase(0, 4 + n);
  }
  return out;
}

std::string encode_message(const RoundMessage& msg) {
  return encode_frame(message_to_wire(msg).dump());
}

RoundMessage decode_message(const std::string& body) {
  return message_from_wire(nlohmann::ordered_json::parse(body));
}

TcpConnection::TcpConnection(int fd) : fd_(fd) {}

TcpConnection::~TcpConnection() { close(); }

TcpConnection::TcpConnection(TcpConnection&& other) noexcept
    : fd_(other.fd_), decoder_(std::move(other.decoder_)), pending_(std::move(other.pending_)) {
  other.fd_ = -1;
}

TcpConnection& TcpConnection::operator=(TcpConnection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    decoder_ = std::move(other.decoder_);
    pending_ = std::move(other.pending_);
    other.fd_ = -1;
  }
  return *this;
}

void TcpConnection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpConnection::send(const RoundMessage& msg) {
  if (fd_ < 0) throw TransportError("send on closed connection");
  std::string frame = encode_message(msg);
  std::size_t sent = 0;
  while (sent < frame.size()) {
    ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, 0);
    if (n <= 0) throw TransportError("connection lost while sending");
    sent += static_cast<std::size_t>(n);
  }
}

RoundMessage TcpConnection::recv() {
  while (pending_.empty()) {
    if (fd_ < 0) throw TransportError("recv on closed connection");
    char buf[4096];
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n <= 0) throw TransportError("connection lost while receiving");
    pending_ = decoder_.feed(buf, static_cast<std::size_t>(n));
  }
  RoundMessage msg = decode_message(pending_.front());
  pending_.erase(pending_.begin());
  return msg;
}

TcpListener::TcpListener(const std::string& address) {
  auto [host, port] = split_address(address);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(std::stoi(port)));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw TransportError("bad listen host: " + host);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw TransportError("bind failed on " + address);
  if (::listen(fd_, 8) != 0) throw TransportError("listen failed on " + address);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpConnection TcpListener::accept() {
  int client = ::accept(fd_, nullptr, nullptr);
  if (client < 0) throw TransportError("accept failed");
  return TcpConnection(client);
}

TcpConnection tcp_connect(const std::string& address) {
  auto [host, port] = split_address(address);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(std::stoi(port)));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw TransportError("bad connect host: " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw TransportError("connect failed to " + address);
  }
  return TcpConnection(fd);
}

RemoteEndpoint::RemoteEndpoint(TcpConnection connection, std::vector<std::string> traveller_ids)
    : connection_(std::move(connection)), ids_(std::move(traveller_ids)) {}

std::vector<std::string> RemoteEndpoint::traveller_ids() { return ids_; }

std::vector<RoundMessage> RemoteEndpoint::start() {
  std::vector<RoundMessage> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) out.push_back(connection_.recv());
  return out;
}

RoundMessage RemoteEndpoint::deliver(const RoundMessage& proposal) {
  connection_.send(proposal);
  return connection_.recv();
}

void run_worker(TcpConnection connection, const RoadNetwork& net,
                std::vector<TravellerSpec> specs) {
  LocalEndpoint endpoint(net, std::move(specs));
  for (const RoundMessage& msg : endpoint.start()) connection.send(msg);
  while (true) {
    RoundMessage proposal;
    try {
      proposal = connection.recv();
    } catch (const TransportError&) {
      return;  // coordinator closed: run complete
    }
    connection.send(endpoint.deliver(proposal));
  }
}

}  // namespace demapf
