#pragma once

#include <stdexcept>
#include <string>

namespace earlycorr {

// Every domain failure derives from Error so callers (the CLI in particular)
// can separate domain errors from usage errors with a single catch.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EARLYCORR_DEFINE_ERROR(Name)              \
  class Name : public Error {                     \
   public:                                        \
    explicit Name(const std::string& what)        \
        : Error(std::string(#Name ": ") + what) {} \
  }

EARLYCORR_DEFINE_ERROR(MalformedCapture);
EARLYCORR_DEFINE_ERROR(InvalidConfig);
EARLYCORR_DEFINE_ERROR(IoError);
EARLYCORR_DEFINE_ERROR(EmptyFlow);
EARLYCORR_DEFINE_ERROR(TooShort);
EARLYCORR_DEFINE_ERROR(ShapeMismatch);
EARLYCORR_DEFINE_ERROR(VocabOverflow);
EARLYCORR_DEFINE_ERROR(InsufficientPairs);
EARLYCORR_DEFINE_ERROR(Divergence);
EARLYCORR_DEFINE_ERROR(InsufficientValidation);
EARLYCORR_DEFINE_ERROR(InvalidPolicy);
EARLYCORR_DEFINE_ERROR(EmptyValidation);
EARLYCORR_DEFINE_ERROR(UndefinedRate);
EARLYCORR_DEFINE_ERROR(InsufficientDecoys);
EARLYCORR_DEFINE_ERROR(DegenerateLabels);
EARLYCORR_DEFINE_ERROR(CheckpointMismatch);

#undef EARLYCORR_DEFINE_ERROR

/// Raised by read_dataset; carries the 1-based JSONL line that failed.
class SchemaViolation : public Error {
 public:
  SchemaViolation(std::size_t line, const std::string& what)
      : Error("SchemaViolation: line " + std::to_string(line) + ": " + what),
        line_(line),
        detail_(what) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

}  // namespace earlycorr
