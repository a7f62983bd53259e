#ifndef PVM_VM_ASSEMBLER_HPP
#define PVM_VM_ASSEMBLER_HPP

#include <string>

#include "vm/module.hpp"

namespace pvm::vm {

// Parses the line-oriented assembly grammar (see docs/assembly.md) and
// returns a validated Module. Throws ParseError with the offending line
// number, or ValidationError from module validation.
Module assemble(const std::string& source);

Module assemble_file(const std::string& path);

}  // namespace pvm::vm

#endif
