#pragma once

#include <stdexcept>
#include <string>

namespace hattn {

// Every error raised by the library derives from Error so callers can catch
// the whole family at once.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class InvalidLength : public Error {
  public:
    using Error::Error;
};

class InvalidRank : public Error {
  public:
    using Error::Error;
};

class ShapeMismatch : public Error {
  public:
    using Error::Error;
};

class HeadShapeMismatch : public Error {
  public:
    using Error::Error;
};

class OddRows : public Error {
  public:
    using Error::Error;
};

class NonFiniteValue : public Error {
  public:
    using Error::Error;
};

class DegeneratePartition : public Error {
  public:
    using Error::Error;
};

class IOError : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

class SvdFailure : public Error {
  public:
    using Error::Error;
};

class OracleGuard : public Error {
  public:
    using Error::Error;
};

} // namespace hattn
