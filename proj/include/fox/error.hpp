#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fox {

enum class Errc {
    invalid_argument,
    resource_exhausted,
    fault,
    parse,
    codec,
    io,
    not_found,
};

inline const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::resource_exhausted: return "resource-exhausted";
        case Errc::fault: return "fault-error";
        case Errc::parse: return "parse-error";
        case Errc::codec: return "codec-error";
        case Errc::io: return "io-error";
        case Errc::not_found: return "not-found";
    }
    return "unknown";
}

/// Base class of every error raised by the simulator.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Trace syntax error; line and column are 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error(Errc::parse, "line " + std::to_string(line) + ", column " +
                                 std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace fox
