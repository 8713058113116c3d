#include "fixtures.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "chemputer/chemlang.hpp"

namespace testing {

std::string fixture_path(const std::string& name) { return std::string(CHEMPUTER_SOURCE_DIR) + "/fixtures/" + name; }

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

chemputer::ChemProgram fixture_program(const std::string& name) {
    return chemputer::chemlang::parse_program(read_text(fixture_path(name)));
}

chemputer::rules::RuleDatabase fixture_rules(const std::string& name) {
    return chemputer::rules::load_rules(read_text(fixture_path(name)));
}

int run_command(const std::string& cmd, std::string* out) {
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed: " + cmd);
    std::array<char, 4096> buf{};
    std::string captured;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) captured.append(buf.data(), n);
    int status = pclose(pipe);
    if (out) *out = std::move(captured);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace testing
