#ifndef PRUNEKIT_ERRORS_HPP_
#define PRUNEKIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace prunekit {

// Numeric failure: divergence (non-finite loss), a layer pruned empty, etc.
// The CLI maps this to exit code 2.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// File/parse failure: missing or malformed checkpoints, datasets, configs.
// The CLI maps this to exit code 3.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prunekit

#endif  // PRUNEKIT_ERRORS_HPP_
