#pragma once

#include <stdexcept>
#include <string>

namespace odlc {

// Every domain error carries a stable machine-readable code. The CLI prints it
// as {"error": <code>, "message": <what()>}.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define ODLC_DEFINE_ERROR(Name)                                   \
  class Name : public ::odlc::Error {                             \
   public:                                                        \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// core-model
ODLC_DEFINE_ERROR(WeightSumError);
ODLC_DEFINE_ERROR(WeightRangeError);
ODLC_DEFINE_ERROR(InvalidInterval);
ODLC_DEFINE_ERROR(InvalidRecord);
ODLC_DEFINE_ERROR(DecodeError);

// exposition
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("ParseError", "line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// edge
ODLC_DEFINE_ERROR(SourceUnavailable);
ODLC_DEFINE_ERROR(FileRotated);
ODLC_DEFINE_ERROR(UnbalancedSpan);
ODLC_DEFINE_ERROR(RecordTooLarge);
ODLC_DEFINE_ERROR(ConnectionLost);
ODLC_DEFINE_ERROR(TransmitTimeout);

// fog
ODLC_DEFINE_ERROR(MalformedFrame);
ODLC_DEFINE_ERROR(StorageFull);
ODLC_DEFINE_ERROR(InvalidRange);
ODLC_DEFINE_ERROR(TraceNotFound);
ODLC_DEFINE_ERROR(BadSelector);
ODLC_DEFINE_ERROR(SinkUnavailable);
ODLC_DEFINE_ERROR(ChecksumMismatch);
ODLC_DEFINE_ERROR(AddressInUse);
ODLC_DEFINE_ERROR(FogUnreachable);

// archive
ODLC_DEFINE_ERROR(DuplicateSegment);
ODLC_DEFINE_ERROR(DegeneratePolygon);
ODLC_DEFINE_ERROR(MissingField);

// meter
ODLC_DEFINE_ERROR(AccountingUnavailable);
ODLC_DEFINE_ERROR(NoSamples);

// harness / cli
ODLC_DEFINE_ERROR(ScenarioConfigError);
ODLC_DEFINE_ERROR(OutOfRange);
ODLC_DEFINE_ERROR(ConfigError);
ODLC_DEFINE_ERROR(IoError);

}  // namespace odlc
