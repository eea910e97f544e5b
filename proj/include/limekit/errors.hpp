#pragma once

#include <stdexcept>

namespace limekit {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error { public: using Error::Error; };
class SingularSystem : public Error { public: using Error::Error; };
class InvalidK : public Error { public: using Error::Error; };
class InvalidSigma : public Error { public: using Error::Error; };
class MissingSegmentation : public Error { public: using Error::Error; };
class EmptyWeights : public Error { public: using Error::Error; };
class ZeroVariance : public Error { public: using Error::Error; };
class EmptyGold : public Error { public: using Error::Error; };
class EmptyExplained : public Error { public: using Error::Error; };
class DegenerateData : public Error { public: using Error::Error; };
class CsvFormatError : public Error { public: using Error::Error; };
class ZeroMass : public Error { public: using Error::Error; };
class AllRowsFailed : public Error { public: using Error::Error; };
class InvalidArgument : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

}  // namespace limekit
