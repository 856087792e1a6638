#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace osagdo {

/// Thrown when array shapes or grid arithmetic do not line up.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when user-supplied data violates a schema or value contract.
/// Carries the itemized violation list when more than one was found.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
    ValidationError(const std::string& what, std::vector<std::string> items)
        : std::runtime_error(what), items_(std::move(items)) {}

    const std::vector<std::string>& items() const { return items_; }

private:
    std::vector<std::string> items_;
};

/// Thrown on filesystem failures (unreadable image, unwritable output dir).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace osagdo
