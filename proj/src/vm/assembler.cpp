#include "vm/assembler.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace pvm::vm {

namespace {

struct PendingRef {
  size_t function;  // index into module.functions
  size_t offset;    // instruction slot awaiting resolution
  std::string symbol;
  int line;
  bool is_call;  // otherwise a branch label
};

[[noreturn]] void parse_fail(int line, const std::string& reason) {
  fail(PVM_ERR_PARSE, "line " + std::to_string(line) + ": " + reason, line);
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::string clean = line;
  for (size_t i = 0; i < clean.size(); i++) {
    if (clean[i] == '#' || clean[i] == ';') {
      clean.resize(i);
      break;
    }
  }
  std::vector<std::string> out;
  std::istringstream in(clean);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

int64_t parse_int(const std::string& tok, int line) {
  int64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    parse_fail(line, "expected integer, got '" + tok + "'");
  return value;
}

std::optional<Op> op_from_mnemonic(const std::string& m) {
  static const std::map<std::string, Op> table = {
      {"const.i64", Op::ConstI64}, {"local.get", Op::LocalGet},
      {"local.set", Op::LocalSet}, {"i64.add", Op::I64Add},
      {"i64.sub", Op::I64Sub},     {"i64.mul", Op::I64Mul},
      {"i64.eq", Op::I64Eq},       {"i64.lt_s", Op::I64LtS},
      {"mem.load64", Op::MemLoad64}, {"mem.store64", Op::MemStore64},
      {"br", Op::Br},              {"br_if", Op::BrIf},
      {"call", Op::Call},          {"return", Op::Return},
      {"halt", Op::Halt},          {"checkpoint", Op::Checkpoint}};
  auto it = table.find(m);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

bool is_integer(const std::string& tok) {
  size_t i = (tok[0] == '-') ? 1 : 0;
  if (i == tok.size()) return false;
  for (; i < tok.size(); i++)
    if (tok[i] < '0' || tok[i] > '9') return false;
  return true;
}

}  // namespace

Module assemble(const std::string& source) {
  Module module;
  module.memory_pages_initial = 1;

  std::map<std::string, uint32_t> function_index;
  std::vector<PendingRef> pending;
  std::optional<std::string> entry_name;
  bool entry_set = false;

  Function* current = nullptr;
  std::map<std::string, uint32_t> labels;  // per current function
  std::vector<PendingRef> label_refs;      // branches in current function

  auto finish_function = [&](int line) {
    for (const PendingRef& ref : label_refs) {
      auto it = labels.find(ref.symbol);
      if (it == labels.end())
        parse_fail(ref.line, "unknown label '" + ref.symbol + "'");
      module.functions[ref.function].code[ref.offset].imm = it->second;
    }
    label_refs.clear();
    labels.clear();
    if (current && current->code.empty())
      parse_fail(line, "function '" + current->name + "' has no instructions");
    current = nullptr;
  };

  std::istringstream in(source);
  std::string raw_line;
  int line = 0;
  while (std::getline(in, raw_line)) {
    line++;
    std::vector<std::string> toks = tokens_of(raw_line);
    if (toks.empty()) continue;
    const std::string& head = toks[0];

    if (head == ".func") {
      if (current) parse_fail(line, "nested .func");
      if (toks.size() != 4) parse_fail(line, ".func expects: name params locals");
      Function f;
      f.name = toks[1];
      int64_t params = parse_int(toks[2], line);
      int64_t locals = parse_int(toks[3], line);
      if (params < 0 || locals < 0 || params + locals > 0xffff)
        parse_fail(line, "bad parameter or local count");
      f.param_count = static_cast<uint32_t>(params);
      f.local_count = static_cast<uint32_t>(locals);
      if (function_index.count(f.name))
        parse_fail(line, "duplicate function '" + f.name + "'");
      function_index[f.name] = static_cast<uint32_t>(module.functions.size());
      module.functions.push_back(std::move(f));
      current = &module.functions.back();
      continue;
    }
    if (head == ".end") {
      if (!current) parse_fail(line, ".end outside a function");
      finish_function(line);
      continue;
    }
    if (head == ".memory") {
      if (toks.size() != 2) parse_fail(line, ".memory expects a page count");
      int64_t pages = parse_int(toks[1], line);
      if (pages < 0 || pages > 1 << 20) parse_fail(line, "bad page count");
      module.memory_pages_initial = static_cast<uint32_t>(pages);
      continue;
    }
    if (head == ".entry") {
      if (toks.size() != 2) parse_fail(line, ".entry expects a function name");
      entry_name = toks[1];
      entry_set = true;
      continue;
    }
    if (head.size() > 1 && head.back() == ':') {
      if (!current) parse_fail(line, "label outside a function");
      if (toks.size() != 1) parse_fail(line, "label must stand alone");
      std::string name = head.substr(0, head.size() - 1);
      if (labels.count(name)) parse_fail(line, "duplicate label '" + name + "'");
      labels[name] = static_cast<uint32_t>(current->code.size());
      continue;
    }

    if (!current) parse_fail(line, "instruction outside a function");
    std::optional<Op> op = op_from_mnemonic(head);
    if (!op) parse_fail(line, "unknown mnemonic '" + head + "'");

    Instruction insn{*op, 0};
    if (op_has_imm(*op)) {
      if (toks.size() != 2)
        parse_fail(line, std::string(op_name(*op)) + " expects one operand");
      const std::string& arg = toks[1];
      size_t fi = module.functions.size() - 1;
      size_t slot = current->code.size();
      if (*op == Op::Br || *op == Op::BrIf) {
        if (is_integer(arg)) {
          insn.imm = parse_int(arg, line);
        } else {
          label_refs.push_back({fi, slot, arg, line, false});
        }
      } else if (*op == Op::Call) {
        if (is_integer(arg)) {
          insn.imm = parse_int(arg, line);
        } else {
          pending.push_back({fi, slot, arg, line, true});
        }
      } else {
        insn.imm = parse_int(arg, line);
      }
    } else if (toks.size() != 1) {
      parse_fail(line, std::string(op_name(*op)) + " takes no operand");
    }
    current->code.push_back(insn);
  }
  if (current) parse_fail(line, "missing .end");

  for (const PendingRef& ref : pending) {
    auto it = function_index.find(ref.symbol);
    if (it == function_index.end())
      parse_fail(ref.line, "unknown function '" + ref.symbol + "'");
    module.functions[ref.function].code[ref.offset].imm = it->second;
  }

  if (entry_set) {
    auto it = function_index.find(*entry_name);
    if (it == function_index.end())
      fail(PVM_ERR_PARSE, ".entry names unknown function '" + *entry_name + "'");
    module.entry_function = it->second;
  } else if (auto it = function_index.find("main"); it != function_index.end()) {
    module.entry_function = it->second;
  } else {
    module.entry_function = 0;
  }

  validate(module);
  return module;
}

Module assemble_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(PVM_ERR_IO, "cannot open module file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return assemble(buf.str());
}

}  // namespace pvm::vm
