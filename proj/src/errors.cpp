#include "discourse/errors.hpp"

namespace discourse {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::TransportError: return "TransportError";
    case Errc::EmptyCompletion: return "EmptyCompletion";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::DegenerateVector: return "DegenerateVector";
    case Errc::SingleClass: return "SingleClass";
    case Errc::TooFewPerClass: return "TooFewPerClass";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::UndefinedScore: return "UndefinedScore";
    case Errc::NoValidTrial: return "NoValidTrial";
    case Errc::SingletonCluster: return "SingletonCluster";
    case Errc::UnknownCluster: return "UnknownCluster";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::MissingLexicon: return "MissingLexicon";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::EmptyProfile: return "EmptyProfile";
    case Errc::WriteError: return "WriteError";
    case Errc::MissingArtifact: return "MissingArtifact";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

void raise(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace discourse
