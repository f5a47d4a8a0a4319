#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "geolm/common/error.hpp"

// Fails unless `stmt` throws geolm::Error carrying `expected_code`.
#define EXPECT_GEOLM_ERROR(stmt, expected_code)                                                \
  do {                                                                                         \
    try {                                                                                      \
      stmt;                                                                                    \
      ADD_FAILURE() << #stmt " did not throw";                                                 \
    } catch (const geolm::Error& e_) {                                                         \
      EXPECT_EQ(e_.code(), expected_code) << e_.what();                                        \
    }                                                                                          \
  } while (0)

namespace geolm::testing {

inline std::string source_dir() { return GEOLM_SOURCE_DIR; }

inline std::string fixture(const std::string& name) { return source_dir() + "/fixtures/toy/" + name; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("geolm_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
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
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace geolm::testing
