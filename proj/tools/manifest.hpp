#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fgp/error.hpp"

namespace fgp::cli {

inline std::string sha256_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open " + path);
  }
  EVP_MD_CTX *ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Run record written as MANIFEST.json next to the outputs.
class Manifest {
public:
  Manifest(std::string command, std::vector<std::string> argv)
      : j_{{"command", std::move(command)},
           {"argv", std::move(argv)},
           {"started", utc_now()},
           {"inputs", nlohmann::json::object()},
           {"outputs", nlohmann::json::object()},
           {"versions",
            {{"fgp", "1.0.0"},
             {"compiler", __VERSION__},
             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                           std::to_string(EIGEN_MAJOR_VERSION) + "." +
                           std::to_string(EIGEN_MINOR_VERSION)},
             {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}} {}

  void input(const std::string &path) { j_["inputs"][path] = sha256_file(path); }
  void output(const std::filesystem::path &path) {
    j_["outputs"][path.filename().string()] = sha256_file(path.string());
  }
  nlohmann::json &json() { return j_; }

  void write(const std::filesystem::path &dir, int exit_code) {
    j_["finished"] = utc_now();
    j_["exit_code"] = exit_code;
    std::ofstream out(dir / "MANIFEST.json");
    out << j_.dump(2) << '\n';
  }

private:
  nlohmann::json j_;
};

} // namespace fgp::cli
