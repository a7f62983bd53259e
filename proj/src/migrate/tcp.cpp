#include "migrate/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace pvm::migrate {

namespace {

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpStream() override { close(); }

  void write(ByteView data) override {
    size_t sent = 0;
    while (sent < data.size()) {
      ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent,
                         MSG_NOSIGNAL);
      if (n <= 0) fail(PVM_ERR_TRANSPORT_CLOSED, "tcp send failed");
      sent += static_cast<size_t>(n);
    }
  }

  size_t read(uint8_t* out, size_t max) override {
    ssize_t n = ::recv(fd_, out, max, 0);
    if (n < 0) fail(PVM_ERR_TRANSPORT_CLOSED, "tcp recv failed");
    return static_cast<size_t>(n);
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

  bool poll() override {
    struct pollfd pfd{fd_, POLLIN, 0};
    return ::poll(&pfd, 1, 0) > 0 && (pfd.revents & POLLIN);
  }

 private:
  int fd_;
};

}  // namespace

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, int port) {
  struct addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  struct addrinfo* res = nullptr;
  std::string port_str = std::to_string(port);
  if (getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || !res)
    fail(PVM_ERR_TRANSPORT_CLOSED, "cannot resolve " + host);
  int fd = socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0 || connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
    freeaddrinfo(res);
    if (fd >= 0) ::close(fd);
    fail(PVM_ERR_TRANSPORT_CLOSED,
         "cannot connect to " + host + ":" + port_str);
  }
  freeaddrinfo(res);
  return std::make_unique<TcpStream>(fd);
}

TcpListener::TcpListener(const std::string& host, int port) {
  fd_ = socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) fail(PVM_ERR_TRANSPORT_CLOSED, "cannot create socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  struct sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    fail(PVM_ERR_TRANSPORT_CLOSED, "bad listen address " + host);
  if (bind(fd_, reinterpret_cast<struct sockaddr*>(&addr), sizeof addr) != 0 ||
      listen(fd_, 8) != 0)
    fail(PVM_ERR_TRANSPORT_CLOSED,
         "cannot listen on " + host + ":" + std::to_string(port));
  socklen_t len = sizeof addr;
  getsockname(fd_, reinterpret_cast<struct sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::accept() {
  int client = ::accept(fd_, nullptr, nullptr);
  if (client < 0) fail(PVM_ERR_TRANSPORT_CLOSED, "accept failed");
  return std::make_unique<TcpStream>(client);
}

}  // namespace pvm::migrate
