#pragma once

#include <stdexcept>
#include <string>

namespace scnn {

// Malformed or inconsistent file contents (checkpoints, images).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem failures: missing paths, unwritable outputs, collisions.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss or weights).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scnn
