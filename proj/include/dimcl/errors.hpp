#ifndef DIMCL_ERRORS_HPP
#define DIMCL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dimcl {

// Bad configuration document or out-of-range setting.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable/unwritable files, truncated or malformed binary payloads.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dimcl

#endif
