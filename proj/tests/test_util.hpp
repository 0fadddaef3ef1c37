#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "lhids/errors.hpp"

// Asserts that `stmt` throws lhids::Error carrying `expected_code`.
#define EXPECT_LHIDS_ERROR(stmt, expected_code)                              \
  do {                                                                       \
    try {                                                                    \
      stmt;                                                                  \
      ADD_FAILURE() << "expected " << lhids::error_name(expected_code);      \
    } catch (const lhids::Error& e) {                                        \
      EXPECT_EQ(e.code(), expected_code) << e.what();                        \
    }                                                                        \
  } while (0)

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lhids_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
