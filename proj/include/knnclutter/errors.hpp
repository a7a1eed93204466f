#pragma once

#include <stdexcept>
#include <string>

namespace knnclutter {

/// Coarse failure category, used by the CLI to pick an exit code.
enum class ErrorKind {
    usage,    // caller violated a contract (bad argument, mismatched lengths)
    parse,    // malformed input file
    numeric,  // data is degenerate for the requested computation
    io        // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidWindow : Error {
    explicit InvalidWindow(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct InvalidK : Error {
    explicit InvalidK(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct TooFewPoints : Error {
    explicit TooFewPoints(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct InvalidParams : Error {
    explicit InvalidParams(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct DegenerateDistances : Error {
    explicit DegenerateDistances(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct DegenerateComponent : Error {
    explicit DegenerateComponent(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct NonFinite : Error {
    explicit NonFinite(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct OutOfRange : Error {
    explicit OutOfRange(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct KSetTooLarge : Error {
    explicit KSetTooLarge(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct PatternTooSmall : Error {
    explicit PatternTooSmall(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct MissingTruth : Error {
    explicit MissingTruth(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::usage, msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(ErrorKind::parse, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

} // namespace knnclutter
