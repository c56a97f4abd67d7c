// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: synth, train, score, evaluate, gradcheck.

#ifndef SASV_CLI_HPP_
#define SASV_CLI_HPP_

#include <exception>
#include <iosfwd>

namespace sasv {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitTraining = 3,
  kExitResolution = 4,
  kExitProtocol = 5,
  kExitGradcheck = 6,
};

/// Exit status for an exception escaping a subcommand.
int exit_code_for(const std::exception& error);

/// Parses argv and runs one subcommand. Never throws; errors are reported on
/// `err` and mapped to an exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace sasv

#endif  // SASV_CLI_HPP_
