#pragma once

#include <stdexcept>
#include <string>

namespace xferod {

/// Base of every error raised by the toolkit. The CLI maps subclasses to exit
/// codes: IoError and MissingFile are I/O failures (3), everything else is a
/// validation failure (2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define XFEROD_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

// tensor_store
XFEROD_DEFINE_ERROR(FormatError);
XFEROD_DEFINE_ERROR(UnsupportedTensor);
XFEROD_DEFINE_ERROR(InvalidData);
XFEROD_DEFINE_ERROR(IoError);
XFEROD_DEFINE_ERROR(ReferenceError);
XFEROD_DEFINE_ERROR(SchemaError);
XFEROD_DEFINE_ERROR(MissingFile);
XFEROD_DEFINE_ERROR(DuplicateKey);
XFEROD_DEFINE_ERROR(ParseError);
XFEROD_DEFINE_ERROR(RangeError);

// metrics / evaluation / synth
XFEROD_DEFINE_ERROR(DegenerateTarget);
XFEROD_DEFINE_ERROR(DegenerateSeries);
XFEROD_DEFINE_ERROR(TooFewScenarios);
XFEROD_DEFINE_ERROR(ProbeError);

#undef XFEROD_DEFINE_ERROR

}  // namespace xferod
