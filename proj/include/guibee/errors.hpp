#pragma once

#include <stdexcept>
#include <string>

namespace guibee {

// Base class for all domain errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Graph-structure violations (unknown node ids, matcher misuse).
class GraphError : public Error {
public:
    using Error::Error;
};

// Archive serialization problems. load() reports the offending file/record.
class ArchiveError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public ArchiveError {
public:
    UnsupportedVersionError(int found, int supported)
        : ArchiveError("unsupported archive format version " + std::to_string(found) +
                       " (this build reads version " + std::to_string(supported) + ")") {}
};

// Oracle transport or parse failures after retries are exhausted.
class OracleError : public Error {
public:
    using Error::Error;
};

class OracleParseError : public OracleError {
public:
    using OracleError::OracleError;
};

// Missing cassette recording in replay mode. Never falls through to a live call.
class CassetteMissError : public OracleError {
public:
    using OracleError::OracleError;
};

// Environment and adapter-protocol failures.
class EnvironmentError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public EnvironmentError {
public:
    using EnvironmentError::EnvironmentError;
};

// Manifest file validation failures.
class ManifestError : public Error {
public:
    using Error::Error;
};

// Rejected numeric input (NaN/inf where a finite value is required).
class NumericDomainError : public Error {
public:
    using Error::Error;
};

// Dataset export produced no records.
class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

}  // namespace guibee
