#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace neuralwarp::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Bad flags or flag combinations.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Runs one command line, program name excluded. Normal output goes to `out`;
/// a failure writes a single "error: <kind>: <message>" line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace neuralwarp::cli
