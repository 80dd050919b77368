#pragma once

#include <stdexcept>
#include <string>

namespace prunekit {

// Unreadable or unwritable paths, short writes, failed renames. CLI exit 3.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent content: traces, score tables, manifests,
// channel/shape mismatches. CLI exit 2.
struct data_error : std::runtime_error {
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prunekit
