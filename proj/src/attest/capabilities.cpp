#include "attest/capabilities.hpp"

#include <fstream>
#include <sstream>

#include "support/error.hpp"

namespace pvm::attest {

const CapabilityRegistry& builtin_capabilities() {
  static const CapabilityRegistry table = {
      {1001, "core-exec"},      // stack-machine execution
      {1002, "snapshot-store"}, // snapshot encode/decode at rest
      {1003, "nn-accel"},       // neural-network acceleration interface
      {1004, "replica-sync"},   // replication synchronization endpoint
      {2001, "gpu-offload"},    // untrusted accelerator offload path
  };
  return table;
}

CapabilityRegistry load_capabilities(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open capability registry: " + path);
  CapabilityRegistry out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string id_tok, name;
    if (!(ls >> id_tok) || id_tok[0] == '#') continue;
    if (!(ls >> name))
      fail(PVM_ERR_PARSE, path + ":" + std::to_string(lineno) +
                              ": expected '<id> <name>'", lineno);
    out[static_cast<uint32_t>(std::stoul(id_tok))] = name;
  }
  return out;
}

std::set<uint32_t> parse_entry_ids(const std::string& spec,
                                   const CapabilityRegistry& registry) {
  std::set<uint32_t> out;
  std::string token;
  std::istringstream in(spec);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    if (token.find_first_not_of("0123456789") == std::string::npos) {
      out.insert(static_cast<uint32_t>(std::stoul(token)));
      continue;
    }
    bool found = false;
    for (const auto& [id, name] : registry) {
      if (name == token) {
        out.insert(id);
        found = true;
        break;
      }
    }
    if (!found) fail(PVM_ERR_USAGE, "unknown capability '" + token + "'");
  }
  return out;
}

}  // namespace pvm::attest
