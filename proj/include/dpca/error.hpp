#pragma once

#include <stdexcept>
#include <string>

namespace dpca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON, TSV, model file).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but does not match the declared layout (unknown bag, missing field).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Values violate a documented invariant (non-positive count, non-stochastic row, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Every token of a bag was removed by pruning.
class EmptyVocabularyError : public Error {
public:
    using Error::Error;
};

/// An observed token has zero probability under every component.
class ImpossibleTokenError : public Error {
public:
    using Error::Error;
};

/// A likelihood or score evaluated to a non-finite value.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Bad arguments to a library call (K = 0, inconsistent tree spec, empty input).
class ArgumentError : public Error {
public:
    using Error::Error;
};

}  // namespace dpca
