#pragma once

#include <stdexcept>
#include <string>

namespace sparsesbc {

// Base of every error this library throws. The CLI maps any of these to a
// nonzero exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition (shape mismatch, invalid argument).
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (CIFAR records, PPM headers, CSV columns).
class FormatError : public Error {
public:
    using Error::Error;
};

// A file that should exist could not be opened or read.
class IngestionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite gradient; the step was not applied.
class TrainingAbort : public Error {
public:
    using Error::Error;
};

} // namespace sparsesbc
