#pragma once

#include <string>

#include "chemputer/program.hpp"
#include "chemputer/rules.hpp"

namespace testing {

std::string fixture_path(const std::string& name);
std::string read_text(const std::string& path);
chemputer::ChemProgram fixture_program(const std::string& name);
chemputer::rules::RuleDatabase fixture_rules(const std::string& name);

/// Runs a shell command, capturing stdout; returns the exit status.
int run_command(const std::string& cmd, std::string* out = nullptr);

}  // namespace testing
