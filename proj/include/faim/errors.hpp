#pragma once

#include <stdexcept>
#include <string>

namespace faim {

/// Invalid configuration or parameters: bad grid setup, malformed theta
/// weights, unusable schema. CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Problems with the data itself: empty groups, degenerate classes,
/// malformed rows, out-of-range scores. CLI maps this to exit code 3.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace faim
