#pragma once

#include <stdexcept>
#include <string>

namespace pvio {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry
class DegenerateTransfer : public Error {
 public:
  using Error::Error;
};
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};
class CameraOnPlane : public Error {
 public:
  using Error::Error;
};
class NotPositiveSemiDefinite : public Error {
 public:
  using Error::Error;
};

// imaging
class EmptyMask : public Error {
 public:
  using Error::Error;
};
class NonPositiveScale : public Error {
 public:
  using Error::Error;
};

// uncertainty
class EmptySampleSet : public Error {
 public:
  using Error::Error;
};
class EmptyInput : public Error {
 public:
  using Error::Error;
};

// ekf
class PlaneCollision : public Error {
 public:
  using Error::Error;
};
class NonMonotoneTime : public Error {
 public:
  using Error::Error;
};
class NotStationary : public Error {
 public:
  using Error::Error;
};

// simulator / eval
class OutOfRange : public Error {
 public:
  using Error::Error;
};
class InsufficientOverlap : public Error {
 public:
  using Error::Error;
};

// io
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvio
