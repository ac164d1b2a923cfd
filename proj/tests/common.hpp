#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "atro/parser.hpp"

#ifndef ATRO_DATA_DIR
#define ATRO_DATA_DIR "."
#endif

inline std::string read_file(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline atro::Program load_program_file(const std::string& rel) {
    auto res = atro::parse_program(read_file(std::string(ATRO_DATA_DIR) + "/" + rel), rel);
    if (!res.ok()) throw std::runtime_error(atro::format_diagnostics(res.diagnostics));
    return *res.program;
}

inline atro::Program parse_ok(const std::string& text) {
    auto res = atro::parse_program(text, "<test>");
    if (!res.ok()) throw std::runtime_error(atro::format_diagnostics(res.diagnostics));
    return *res.program;
}
