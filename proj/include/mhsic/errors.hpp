#pragma once

#include <stdexcept>
#include <string>

namespace mhsic {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// All pairwise distances are zero, so no bandwidth can be derived.
class DegenerateSample : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NotSymmetric : public Error {
public:
    using Error::Error;
};

/// The studentising scale is zero; the data cannot calibrate the test.
class DegenerateVariance : public Error {
public:
    using Error::Error;
};

class TooFewObservations : public Error {
public:
    using Error::Error;
};

/// A split-martingale test was handed a bandwidth that depends on the
/// second half of the sample.
class BandwidthLeak : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace mhsic
