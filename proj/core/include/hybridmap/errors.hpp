#pragma once

#include <stdexcept>
#include <string>

namespace hybridmap {

// All library failures derive from Error so callers can catch one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define HYBRIDMAP_ERROR_TYPE(NAME)                                        \
    struct NAME : Error {                                                 \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

HYBRIDMAP_ERROR_TYPE(DuplicateKey);
HYBRIDMAP_ERROR_TYPE(UnknownColumn);
HYBRIDMAP_ERROR_TYPE(DomainOverflow);
HYBRIDMAP_ERROR_TYPE(CodeOutOfRange);
HYBRIDMAP_ERROR_TYPE(DimensionMismatch);
HYBRIDMAP_ERROR_TYPE(EmptyDataset);
HYBRIDMAP_ERROR_TYPE(CorruptBlob);
HYBRIDMAP_ERROR_TYPE(KeyAlreadyExists);
HYBRIDMAP_ERROR_TYPE(KeyNotFound);
HYBRIDMAP_ERROR_TYPE(KeyOutOfDomain);
HYBRIDMAP_ERROR_TYPE(InvalidRange);
HYBRIDMAP_ERROR_TYPE(CorruptManifest);
HYBRIDMAP_ERROR_TYPE(MissingComponent);
HYBRIDMAP_ERROR_TYPE(ZeroData);
HYBRIDMAP_ERROR_TYPE(ParseError);
HYBRIDMAP_ERROR_TYPE(FloatColumnRejected);
HYBRIDMAP_ERROR_TYPE(AnswerMismatch);
HYBRIDMAP_ERROR_TYPE(IncompatibleReports);

#undef HYBRIDMAP_ERROR_TYPE

} // namespace hybridmap
