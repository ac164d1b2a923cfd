#pragma once

#include <optional>
#include <string>
#include <vector>

#include "atro/ast.hpp"

namespace atro {

struct ParseResult {
    std::optional<Program> program;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return program.has_value(); }
};

// Parses and validates a program. On failure the result carries every
// syntax/resolution error found, with file:line:col positions.
ParseResult parse_program(const std::string& text, const std::string& filename = "<input>");

// Validation of an already-built AST (used on refactoring output).
std::vector<Diagnostic> validate_program(const Program& p, const std::string& filename = "<ast>");

} // namespace atro
