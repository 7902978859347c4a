#pragma once

#include <stdexcept>
#include <string>

namespace hsps {

// Bad input: malformed config, schema violations, out-of-range parameters.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The inputs are well formed but push the low-gain model outside its
// regime (a probability above one, a negative pattern probability, ...).
class ModelValidityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Quadrature did not converge, a covariance lost positivity, a
// decomposition failed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hsps
