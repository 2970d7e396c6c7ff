// SPDX-License-Identifier: Apache-2.0
#include "rewritelab/provenance.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "rewritelab/errors.hpp"

namespace rewritelab {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }

  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw std::runtime_error("SHA-256 update failed");
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len) != 1) throw std::runtime_error("SHA-256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[digest[i] >> 4]);
      out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::map<std::string, std::string> hash_artifacts(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir).generic_string();
    if (rel == kRunRecordName) continue;
    out[rel] = sha256_file(entry.path());
  }
  return out;
}

RunRecord write_run_record(const std::filesystem::path& dir, std::vector<std::string> argv, std::uint64_t seed,
                           nlohmann::json config) {
  RunRecord rec;
  rec.argv = std::move(argv);
  rec.seed = seed;
  rec.config = std::move(config);
  rec.config_sha256 = sha256_hex(rec.config.dump());
  rec.artifacts = hash_artifacts(dir);
  nlohmann::ordered_json j;
  j["argv"] = rec.argv;
  j["seed"] = rec.seed;
  j["config"] = rec.config;
  j["config_sha256"] = rec.config_sha256;
  j["artifacts"] = rec.artifacts;
  std::ofstream out(dir / kRunRecordName, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / kRunRecordName).string());
  out << j.dump(2) << '\n';
  return rec;
}

RunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    RunRecord rec;
    rec.argv = j.at("argv").get<std::vector<std::string>>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.config = j.at("config");
    rec.config_sha256 = j.at("config_sha256").get<std::string>();
    rec.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + " is not a valid run record: " + e.what());
  }
}

}  // namespace rewritelab
