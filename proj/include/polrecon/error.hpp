#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace polrecon {

enum class ErrorKind {
    domain,
    unsupported_medium,
    frame_degenerate,
    geometry,
    degenerate_normal,
    numeric,
    index,
    unconstrained,
    inconsistency,
    format,
    schema,
    io,
    no_signal,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::unsupported_medium: return "unsupported_medium";
    case ErrorKind::frame_degenerate: return "frame_degenerate";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::degenerate_normal: return "degenerate_normal";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::index: return "index";
    case ErrorKind::unconstrained: return "unconstrained";
    case ErrorKind::inconsistency: return "inconsistency";
    case ErrorKind::format: return "format";
    case ErrorKind::schema: return "schema";
    case ErrorKind::io: return "io";
    case ErrorKind::no_signal: return "no_signal";
    }
    return "unknown";
}

/// Every failure raised by the library. `kind()` is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

/// Malformed binary input. `offset` is the byte position the reader was at.
class FormatError : public Error {
public:
    FormatError(std::uint64_t offset, const std::string& what)
        : Error(ErrorKind::format, what + " (at byte offset " + std::to_string(offset) + ")"),
          m_offset(offset) {}

    std::uint64_t offset() const noexcept { return m_offset; }

private:
    std::uint64_t m_offset;
};

/// Invalid configuration. `field` is the dotted path of the offending entry.
class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string& what)
        : Error(ErrorKind::schema, "field '" + field + "': " + what), m_field(std::move(field)) {}

    const std::string& field() const noexcept { return m_field; }

private:
    std::string m_field;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

} // namespace polrecon
