#pragma once

#include <stdexcept>
#include <string>

namespace tablab {

// bad user input: malformed config, schema mismatch, invalid flag values
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// a pipeline stage failed on valid input (degenerate data, divergence, io)
class StageError : public std::runtime_error {
public:
    explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public ConfigError {
public:
    ParseError(const std::string& msg, std::size_t row, std::size_t col)
        : ConfigError(msg + " (row " + std::to_string(row) + ", column " + std::to_string(col) + ")"),
          row_(row),
          col_(col) {}
    std::size_t row() const { return row_; }
    std::size_t col() const { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

}  // namespace tablab
