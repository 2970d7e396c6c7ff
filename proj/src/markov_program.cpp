// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include "rewritelab/errors.hpp"
#include "rewritelab/markov.hpp"
#include "rewritelab/text.hpp"

namespace rewritelab::markov {

namespace {

std::vector<Symbol> parse_symbol_list(std::string_view body, std::size_t line_no) {
  std::vector<Symbol> out;
  for (auto token : split_whitespace(body)) {
    const auto decoded = utf8_decode(token);
    if (decoded.size() != 1) throw ParseError("symbols must be single code points: '" + std::string(token) + "'", line_no);
    out.push_back(decoded.front());
  }
  return out;
}

Sequence parse_side(std::string_view side, std::size_t line_no) {
  std::string compact;
  for (char c : side) {
    if (c != ' ' && c != '\t') compact.push_back(c);
  }
  if (compact == "_") return {};
  try {
    return utf8_decode(compact);
  } catch (const ParseError&) {
    throw ParseError("invalid UTF-8 in rule", line_no);
  }
}

}  // namespace

Program parse_program(std::string_view text) {
  Program program;
  std::vector<Symbol> alphabet;
  std::vector<Symbol> work;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.starts_with("alphabet:")) {
      alphabet = parse_symbol_list(line.substr(9), line_no);
      continue;
    }
    if (line.starts_with("work:")) {
      work = parse_symbol_list(line.substr(5), line_no);
      continue;
    }
    if (line.starts_with("vars:")) {
      program.variables = parse_symbol_list(line.substr(5), line_no);
      continue;
    }
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) throw ParseError("expected 'LHS -> RHS'", line_no);
    SchemaRule rule;
    rule.lhs = parse_side(line.substr(0, arrow), line_no);
    std::string_view rest = line.substr(arrow + 2);
    if (!rest.empty() && rest.front() == '.') {
      rule.terminal = true;
      rest.remove_prefix(1);
    }
    rule.rhs = parse_side(rest, line_no);
    program.schema.push_back(std::move(rule));
    if (start > text.size()) break;
  }
  if (alphabet.empty()) throw ParseError("missing 'alphabet:' header", 0);
  for (Symbol v : program.variables) {
    for (Symbol a : alphabet) {
      if (a == v) throw ValidationError("schema variable " + utf8_encode(v) + " is also an alphabet letter");
    }
    for (Symbol w : work) {
      if (w == v) throw ValidationError("schema variable " + utf8_encode(v) + " is also a work symbol");
    }
  }
  auto rules = expand_schema(program.schema, alphabet, program.variables);
  program.algorithm = make_algorithm(std::move(alphabet), std::move(work), std::move(rules));
  return program;
}

Program load_program(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open program file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_program(buf.str());
}

Program reversal_program() {
  return parse_program(
      "alphabet: a b\n"
      "work: α β\n"
      "vars: x y\n"
      "αx -> xαβx\n"
      "βxy -> yβx\n"
      "αβx -> xα\n"
      "α ->. _\n"
      "_ -> α\n");
}

}  // namespace rewritelab::markov
