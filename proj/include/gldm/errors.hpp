#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "gldm/common.hpp"

namespace gldm {
inline namespace GLDM_ABI {

enum class ErrorKind { Config, Shape, Parameter, Data, Io, Checkpoint, Numeric };

std::string_view error_kind_name(ErrorKind kind);

/// Base of every error the library throws. `kind()` is the machine-readable
/// class the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GLDM_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Kind, message) {}    \
  };

GLDM_DEFINE_ERROR(ConfigError, ErrorKind::Config)
GLDM_DEFINE_ERROR(ShapeError, ErrorKind::Shape)
GLDM_DEFINE_ERROR(ParameterError, ErrorKind::Parameter)
GLDM_DEFINE_ERROR(DataError, ErrorKind::Data)
GLDM_DEFINE_ERROR(IoError, ErrorKind::Io)
GLDM_DEFINE_ERROR(CheckpointError, ErrorKind::Checkpoint)
GLDM_DEFINE_ERROR(NumericError, ErrorKind::Numeric)

#undef GLDM_DEFINE_ERROR

}  // namespace GLDM_ABI
}  // namespace gldm
