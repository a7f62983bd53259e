#ifndef PVM_SUPPORT_ERROR_HPP
#define PVM_SUPPORT_ERROR_HPP

#include <stdexcept>
#include <string>

#include "portvm.h"

namespace pvm {

// All library failures are thrown as Error carrying a pvm_status code;
// the C API boundary translates them back to plain status returns.
class Error : public std::runtime_error {
 public:
  Error(pvm_status code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Error(pvm_status code, std::string message, long detail)
      : std::runtime_error(std::move(message)), code_(code), detail_(detail) {}

  pvm_status code() const noexcept { return code_; }

  // Context-dependent index: offending line, chunk, or hop.
  long detail() const noexcept { return detail_; }

 private:
  pvm_status code_;
  long detail_ = -1;
};

const char* status_name(pvm_status code) noexcept;

[[noreturn]] inline void fail(pvm_status code, std::string message) {
  throw Error(code, std::move(message));
}

[[noreturn]] inline void fail(pvm_status code, std::string message,
                              long detail) {
  throw Error(code, std::move(message), detail);
}

}  // namespace pvm

#endif
