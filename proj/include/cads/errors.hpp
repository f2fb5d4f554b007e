#pragma once

#include <stdexcept>
#include <string>

namespace cads {

// Base class for every pipeline error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CADS_ERROR(Name)                    \
    class Name : public Error {             \
    public:                                 \
        using Error::Error;                 \
    }

// volgrid
CADS_ERROR(InvalidOrientation);
CADS_ERROR(InvalidInterpolation);
CADS_ERROR(GridMismatch);

// metrics
CADS_ERROR(UndefinedDistance);
CADS_ERROR(UndefinedRatio);
CADS_ERROR(UnknownStructure);

// qc
CADS_ERROR(EmptyTrainingSet);

// rank
CADS_ERROR(SampleTooSmall);
CADS_ERROR(DegenerateSample);

// assembly
CADS_ERROR(IncompletePlan);
CADS_ERROR(MissingSource);
CADS_ERROR(DegenerateOccurrence);

// postfix
CADS_ERROR(EmptyCentroid);
CADS_ERROR(InsufficientSlices);

// io
CADS_ERROR(NotNifti);
CADS_ERROR(CorruptFile);
CADS_ERROR(ParseError);
CADS_ERROR(DuplicateCase);
CADS_ERROR(IoError);
CADS_ERROR(AdapterError);

#undef CADS_ERROR

class UnsupportedDatatype : public Error {
public:
    explicit UnsupportedDatatype(int code)
        : Error("unsupported NIfTI datatype code " + std::to_string(code)), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

}  // namespace cads
