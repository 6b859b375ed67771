#pragma once

#include <stdexcept>
#include <string>

namespace finslerlab
{
/// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-range input.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Metric fails positivity, convexity or a Randers bound.
class InvalidMetricError : public Error
{
public:
  using Error::Error;
};

/// A conformal factor that is not strictly positive.
class NotConformalFactorError : public Error
{
public:
  using Error::Error;
};

/// Loop closure or size invariant violated.
class MalformedLoopError : public Error
{
public:
  using Error::Error;
};

/// Loop of zero length, or in the trivial class where a non-trivial one is
/// required.
class DegenerateLoopError : public Error
{
public:
  using Error::Error;
};

/// Loop velocity exceeds the speed cap of a loop measure.
class CapViolationError : public Error
{
public:
  using Error::Error;
};

class SolverFailure : public Error
{
public:
  using Error::Error;
};

class ConstructionFailure : public Error
{
public:
  using Error::Error;
};

class PerturbationFailure : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

}  // namespace finslerlab
