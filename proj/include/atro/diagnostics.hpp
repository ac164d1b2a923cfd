#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace atro {

struct SourcePos {
    int line = 0;
    int col = 0;
};

struct Diagnostic {
    std::string file;
    SourcePos pos;
    std::string message;

    std::string str() const;
};

std::string format_diagnostics(const std::vector<Diagnostic>& ds);

/* Runtime evaluation failure (unbound variable, index out of range,
 * division by zero, uuid exhaustion, ...). */
struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace atro
