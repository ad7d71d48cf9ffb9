#pragma once

#include <stdexcept>
#include <string>

namespace sst {

// Every failure carries the process exit code the CLI maps it to:
// 2 input/config, 3 geometry validity, 4 unphysical state, 5 identifiability.
class Error : public std::runtime_error {
public:
    Error(const std::string &what, int exit_code)
        : std::runtime_error(what), exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string &what) : Error(what, 2) {}
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string &what) : Error(what, 3) {}
};

class UnphysicalStateError : public Error {
public:
    explicit UnphysicalStateError(const std::string &what) : Error(what, 4) {}
};

class IdentifiabilityError : public Error {
public:
    IdentifiabilityError(const std::string &what, int rank)
        : Error(what, 5), rank_(rank) {}

    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

// Fitting found no signal (fitted trace scale <= 0).
class DegenerateFitError : public Error {
public:
    explicit DegenerateFitError(const std::string &what) : Error(what, 5) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string &what) : Error(what, 2) {}
};

// Iterative numerics (Jacobi sweeps, quadrature refinement) that did not settle.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string &what) : Error(what, 1) {}
};

} // namespace sst
