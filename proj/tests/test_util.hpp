#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "common/rng.hpp"
#include "image/image.hpp"

namespace sf::testing {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sf_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = "") const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

/// Smooth gradients plus a few blobs, quantized to 8 bit so PNG round-trips exactly.
inline ImageBuffer procedural_image(int w, int h, std::uint64_t seed) {
  CounterRng rng(seed, 99);
  const float fx = rng.uniform(0.5f, 3.0f), fy = rng.uniform(0.5f, 3.0f);
  const float ph = rng.uniform(0.0f, 6.28f);
  ImageBuffer img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float u = static_cast<float>(x) / w, v = static_cast<float>(y) / h;
      const float vals[3] = {0.5f + 0.4f * std::sin(fx * 6.28f * u + ph),
                             0.5f + 0.4f * std::cos(fy * 6.28f * v + ph),
                             0.3f + 0.5f * u * v};
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = quantize8(vals[c]) / 255.0f;
    }
  return img;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Every file under `root` keyed by relative path. The "timestamp:" line of
/// REPRO.txt files is dropped, since it is the one line allowed to differ.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string body = read_file(e.path());
    if (e.path().filename() == "REPRO.txt") {
      std::istringstream in(body);
      std::string kept;
      for (std::string line; std::getline(in, line);)
        if (line.rfind("timestamp:", 0) != 0) kept += line + "\n";
      body = kept;
    }
    out[std::filesystem::relative(e.path(), root).string()] = body;
  }
  return out;
}

struct ProcessResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

/// Runs a shell command line, capturing output.
inline ProcessResult run_process(const std::string& cmdline) {
  ProcessResult r;
  FILE* p = ::popen((cmdline + " 2>&1").c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = ::pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace sf::testing
