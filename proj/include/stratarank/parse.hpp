#pragma once

#include <stdexcept>
#include <string>

#include "stratarank/design.hpp"

namespace stratarank {

struct ParseError : std::runtime_error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& what, int line_, int column_)
        : std::runtime_error("line " + std::to_string(line_) + ", col " +
                             std::to_string(column_) + ": " + what),
          line(line_),
          column(column_) {}
};

// Parses the line-oriented design-file format (docs/FORMATS.md) and
// returns a validated DesignSpec with the alias closure materialized.
DesignSpec parse_design(const std::string& text);

// Canonical serialization; parse(serialize(spec)) round-trips bit-exactly.
std::string serialize_design(const DesignSpec& spec);

DesignSpec load_design_file(const std::string& path);

}  // namespace stratarank
