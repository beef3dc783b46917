#pragma once

#include <stdexcept>
#include <string>

namespace ltoda {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or size mismatch, or a size that the requested object cannot have.
struct DimensionError : Error {
    using Error::Error;
};

/// Singular or numerically singular matrix (condition estimate above 1e12).
struct SingularMatrixError : Error {
    using Error::Error;
};

/// Argument outside the admissible domain (caps, parity, unknown names).
struct DomainError : Error {
    using Error::Error;
};

/// A precondition or postcondition stated by an operation was violated.
struct ContractError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

/// Raised by automorphism order search when no order up to the bound exists.
struct NotFiniteOrderError : Error {
    using Error::Error;
};

/// Singular field value met during integration.
struct BlowUpError : Error {
    BlowUpError(int i, int j, const std::string& what)
        : Error(what + " at node (" + std::to_string(i) + ", " + std::to_string(j) + ")"), node_i(i), node_j(j) {}
    int node_i;
    int node_j;
};

} // namespace ltoda
