#include "manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace chemputer::cli {

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_manifest(const RunManifest& m) {
    if (m.outputs.empty()) return;
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["tool_version"] = std::string(kToolVersion);
    if (m.seed) {
        j["seed"] = *m.seed;
    } else {
        j["seed"] = nullptr;
    }
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& p : m.inputs) j["inputs"].push_back({{"path", p}, {"sha256", sha256_hex(slurp(p))}});
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& p : m.outputs) j["outputs"].push_back({{"path", p}, {"sha256", sha256_hex(slurp(p))}});
    const std::string path = m.outputs.front() + ".manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace chemputer::cli
