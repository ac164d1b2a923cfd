#pragma once

#include <string>

#include "atro/interp.hpp"

namespace atro {

// Workload files:
//   init SCHEMA (k1, k2) field=value, field=value;
//   invoke txn(a1, a2);
// Values are integers or true/false. '//' comments allowed.
Workload parse_workload(const std::string& text, const std::string& filename = "<workload>");

std::string print_workload(const Workload& w);

} // namespace atro
