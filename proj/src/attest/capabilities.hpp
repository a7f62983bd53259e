#ifndef PVM_ATTEST_CAPABILITIES_HPP
#define PVM_ATTEST_CAPABILITIES_HPP

#include <map>
#include <set>
#include <string>

namespace pvm::attest {

// Registry of capability entry ids a node may advertise in its quotes.
// Built-in table below; deployments can override with a registry file
// of "<id> <name> [description]" lines.
using CapabilityRegistry = std::map<uint32_t, std::string>;

const CapabilityRegistry& builtin_capabilities();
CapabilityRegistry load_capabilities(const std::string& path);

// Parses "1001,1003" into an id set; names from the registry also work.
std::set<uint32_t> parse_entry_ids(const std::string& spec,
                                   const CapabilityRegistry& registry);

}  // namespace pvm::attest

#endif
