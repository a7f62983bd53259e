#ifndef PVM_MIGRATE_TCP_HPP
#define PVM_MIGRATE_TCP_HPP

#include <memory>
#include <string>

#include "migrate/wire.hpp"

namespace pvm::migrate {

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, int port);

class TcpListener {
 public:
  // Binds and listens; port 0 picks an ephemeral port.
  TcpListener(const std::string& host, int port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  int port() const { return port_; }
  std::unique_ptr<ByteStream> accept();

 private:
  int fd_ = -1;
  int port_ = 0;
};

}  // namespace pvm::migrate

#endif
