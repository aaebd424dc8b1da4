#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uat::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kIoError = 3,
    kNonFinite = 4,
    kMissingCheckpoint = 5,
    kToleranceBreach = 6,
};

/// Version string recorded in run directories.
std::string version();

/// Entry point of the `uat` binary; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uat::cli
