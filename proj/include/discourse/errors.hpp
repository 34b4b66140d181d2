#pragma once

#include <stdexcept>
#include <string>

namespace discourse {

// Every failure mode the pipeline can signal, one code per condition.
enum class Errc {
  // endpoints
  AuthError,
  RateLimited,
  TransportError,
  EmptyCompletion,
  DimensionMismatch,
  // corpus
  ParseError,
  EmptyTable,
  // embedstore
  BadMagic,
  TruncatedFile,
  ChecksumMismatch,
  DegenerateVector,
  // svmvalidate
  SingleClass,
  TooFewPerClass,
  // clustering
  KTooLarge,
  UndefinedScore,
  NoValidTrial,
  // representatives
  SingletonCluster,
  UnknownCluster,
  // projection
  DegenerateData,
  TooFewPoints,
  // lexical
  MissingLexicon,
  KindMismatch,
  // report
  IdMismatch,
  EmptyProfile,
  WriteError,
  // cli / config
  MissingArtifact,
  InvalidConfig,
  InvalidArgument,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& message);

}  // namespace discourse
