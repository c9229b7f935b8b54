#include "pathagg/error.hpp"

namespace pathagg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfiguration: return "invalid_configuration";
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kDecodeFailure: return "decode_failure";
    case ErrorKind::kParse: return "parse_error";
    case ErrorKind::kIncompatibleVersion: return "incompatible_version";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kTraining: return "training";
  }
  return "unknown";
}

void rethrow_with_context(const Error& error, const std::string& context) {
  const std::string message = context + ": " + error.what();
  switch (error.kind()) {
    case ErrorKind::kInvalidConfiguration: throw InvalidConfiguration(message);
    case ErrorKind::kInvalidInput: throw InvalidInput(message);
    case ErrorKind::kDecodeFailure: throw DecodeFailure(message);
    case ErrorKind::kParse: throw Error(ErrorKind::kParse, message);
    case ErrorKind::kIncompatibleVersion: throw IncompatibleVersion(message);
    case ErrorKind::kCapacity: throw CapacityError(message);
    case ErrorKind::kGeneration: throw GenerationError(message);
    case ErrorKind::kTraining: throw TrainingError(message);
  }
  throw Error(error.kind(), message);
}

}  // namespace pathagg
