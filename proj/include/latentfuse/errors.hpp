#pragma once

#include <stdexcept>
#include <string>

namespace latentfuse {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data is malformed (non-finite entries, empty matrices, ...).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// A parameter is out of its documented range (k, q, sizes, flags).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// An adaptive kernel scale collapsed to zero (duplicate samples).
class DegenerateScaleError : public Error {
public:
    explicit DegenerateScaleError(const std::string& msg, int sample = -1)
        : Error(msg), sample_index(sample) {}
    int sample_index;
};

/// A kernel column summed to zero, so no Markov normalization exists.
class DegenerateGraphError : public Error {
public:
    using Error::Error;
};

/// An eigensolver failed to converge or produced unusable output.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The spectrum itself is unusable (no gap, complex leading pair).
class SpectralError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed; carries the 1-based offending line.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg, long line_no = 0)
        : Error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
    long line;
};

}  // namespace latentfuse
