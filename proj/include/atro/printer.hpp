#pragma once

#include <string>

#include "atro/ast.hpp"

namespace atro {

std::string to_text(const ExprPtr& e);
std::string to_text(const WherePtr& w);
std::string to_text(const CmdPtr& c, int indent = 0);
std::string to_text(const Schema& s);
std::string to_text(const Transaction& t);

// Round-trips: parse_program(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& p);

// Conjunction with atoms sorted by (field, op, expr text); used as the
// canonical form for clause comparison. Empty when the clause is not a
// pure conjunction.
WherePtr canonical_where(const WherePtr& w);
bool where_equivalent(const WherePtr& a, const WherePtr& b);

} // namespace atro
