#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>

#include "gldm/config.hpp"
#include "gldm/model.hpp"

namespace gldm::cli {

/// Entry point shared by the `gldmnet` binary and in-process tests. Returns the
/// process exit code; failures print one `error: <Kind>: <message>` line to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Rebuilds the model a checkpoint was trained with and loads its state.
struct LoadedModel {
  RunConfig config;
  std::unique_ptr<GLDMNet> model;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace gldm::cli
