#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace iswerm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised for invalid inputs and failed preconditions across the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loss families supported by the reference-risk machinery.
enum class LossKind { Squared, PolicyValue };

}  // namespace iswerm
