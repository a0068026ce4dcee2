#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace clot {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr const char* kVersion = "0.1.0";

/// Violated precondition on an API call: bad dimensions, unknown names,
/// out-of-range arguments.  These indicate caller bugs, not bad data.
class contract_error : public std::invalid_argument {
 public:
  explicit contract_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or inconsistent external input: files, configs, datasets.
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown at runtime: non-finite values, singular systems,
/// failed line searches that cannot be recovered from.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

#define CLOT_REQUIRE(cond, msg)              \
  do {                                       \
    if (!(cond)) {                           \
      throw ::clot::contract_error(msg);     \
    }                                        \
  } while (0)

#define CLOT_VALIDATE(cond, msg)             \
  do {                                       \
    if (!(cond)) {                           \
      throw ::clot::validation_error(msg);   \
    }                                        \
  } while (0)

}  // namespace clot
