#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gtrm {

// Base type for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A draw op or requested region falls outside its frame.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Incompatible image/frame dimensions (template larger than image, frame pair
// of different sizes, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Input that leaves an operation with nothing to work on (e.g. inpaint region
// covering the whole frame).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Bad configuration: missing mask directory, empty lexicon, out-of-range
// thresholds, malformed config or manifest files.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Wire-level violation on a live session (unknown message type, bad HELLO,
// non-increasing frame ids).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Failed decode of a wire message. `kind` discriminates the failure mode and
// `offset` points at the offending byte where that is meaningful.
class DecodeError : public Error {
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        UnknownType,
        Truncated,
        UnknownOpKind,
        BadPayload,
    };

    DecodeError(Kind k, const std::string& msg, std::size_t off = 0)
        : Error(msg), kind(k), offset(off) {}

    Kind kind;
    std::size_t offset;
};

}  // namespace gtrm
