#pragma once

#include <stdexcept>
#include <string>

namespace ramangeo {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor or layer shapes do not line up; the message names the offending axes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument value is outside its documented range.
class ValueError : public Error {
public:
    using Error::Error;
};

/// An index (class label, target, ...) is out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input text; carries a line number where applicable.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Filesystem or stream failure, including truncated binary files.
class IoError : public Error {
public:
    using Error::Error;
};

/// Unrecognized magic bytes or unsupported format version.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Stored checksum does not match the payload.
class ChecksumError : public Error {
public:
    using Error::Error;
};

/// An operation received or produced an empty collection it cannot handle.
class EmptyError : public Error {
public:
    using Error::Error;
};

/// A spectrum with zero intensity range; flagged and excluded from processing.
class DegenerateSpectrumError : public Error {
public:
    using Error::Error;
};

/// Wavenumbers are not strictly increasing after duplicate collapse.
class OrderingError : public Error {
public:
    using Error::Error;
};

/// Too few points for the requested interpolation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Resampling produced no in-support grid points (support disjoint from window).
class AllZeroError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite math was expected (NaN loss, overflow, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace ramangeo
