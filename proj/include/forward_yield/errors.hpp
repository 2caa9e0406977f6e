#pragma once

#include <stdexcept>
#include <string>

namespace forward_yield {

/// Input outside the mathematical domain of an operation (x <= 0, alpha
/// outside (0,1), horizon <= 0, ...).
class DomainError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// A vector that must live in the admissible subspace R (or in its
/// orthogonal complement) does not.
class SubspaceViolation : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

/// A numerical estimator could not produce a meaningful value
/// (non-positive mean under a log, too coarse a grid, ...).
class EstimationError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace forward_yield
