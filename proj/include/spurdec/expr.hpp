#pragma once

// Restricted integer expression language for mechanism definitions.
// Grammar (C-like precedence, all values are 64-bit signed integers,
// comparisons and logical operators yield 0/1, nonzero is truthy):
//
//   expr    := ternary
//   ternary := or ('?' expr ':' expr)?
//   or      := and ('||' and)*
//   and     := cmp ('&&' cmp)*
//   cmp     := sum (('=='|'!='|'<'|'<='|'>'|'>=') sum)?
//   sum     := term (('+'|'-') term)*
//   term    := unary ('*' unary)*
//   unary   := ('!'|'-')? primary
//   primary := integer | identifier | '(' expr ')'
//
// Identifiers refer to parent variables by name and evaluate to the parent's
// numeric value encoding.

#include <cstdint>
#include <map>
#include <string>

namespace spurdec {

// Parses and evaluates `text` under the given environment. Throws
// std::invalid_argument on syntax errors or unknown identifiers.
std::int64_t evaluate_expression(const std::string& text,
                                 const std::map<std::string, std::int64_t>& env);

// Parse-only validation pass (throws on malformed input).
void check_expression(const std::string& text,
                      const std::map<std::string, std::int64_t>& env);

}  // namespace spurdec
