#ifndef PVM_TESTS_PROGRAM_GEN_HPP
#define PVM_TESTS_PROGRAM_GEN_HPP

#include "support/bytes.hpp"
#include "vm/module.hpp"

namespace pvm::testsupport {

// Generates a random well-formed, terminating module: bounded counted
// loops, calls restricted to higher function indices, memory accesses
// aligned and in bounds, operand stacks balanced by construction. Every
// program validates and halts without trapping.
pvm::vm::Module generate_program(uint64_t seed);

}  // namespace pvm::testsupport

#endif
