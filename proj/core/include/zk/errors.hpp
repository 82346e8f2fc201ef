#ifndef ZK_ERRORS_HPP
#define ZK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace zk {

// Preconditions and malformed inputs: std::invalid_argument.

// A numerical guard tripped: blow-up detection, Newton divergence,
// near-singular quadrature denominators, degenerate pairings.
struct guard_error : std::runtime_error {
    explicit guard_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File I/O failures: missing files, truncated payloads, version mismatch.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A speed at or below the instability threshold where an unstable
// spectrum was required.
struct subcritical_error : std::invalid_argument {
    explicit subcritical_error(const std::string& msg) : std::invalid_argument(msg) {}
};

// State outside the tubular neighborhood of the solitary-wave orbit.
struct outside_tube_error : guard_error {
    explicit outside_tube_error(const std::string& msg) : guard_error(msg) {}
};

}  // namespace zk

#endif
