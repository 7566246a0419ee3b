// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_TESTS_TEMP_DIR_HPP
#define AFFORD_TESTS_TEMP_DIR_HPP

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

namespace afford::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("afford-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

}  // namespace afford::testing

#endif  // AFFORD_TESTS_TEMP_DIR_HPP
