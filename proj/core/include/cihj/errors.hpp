#pragma once

#include <stdexcept>
#include <string>

namespace cihj {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration: bad JSON, missing file, out-of-range parameter.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A combinatorial sweep would exceed the configured cap.
class CapError : public Error {
public:
    using Error::Error;
};

/// Two paths or functionals do not share a GridSpec.
class SpecMismatchError : public Error {
public:
    using Error::Error;
};

/// Node index or step outside the grid, or step not a grid multiple.
class GridError : public Error {
public:
    using Error::Error;
};

/// Value-table lookup on a path outside the solved family.
class KeyMissError : public Error {
public:
    using Error::Error;
};

/// Terminal data violates phi1(T,.) <= phi2(T,.).
class BoundaryError : public Error {
public:
    BoundaryError(const std::string& what, double gap) : Error(what), terminal_gap(gap) {}
    double terminal_gap;
};

/// Internal consistency check failed (indicates a library bug).
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace cihj
