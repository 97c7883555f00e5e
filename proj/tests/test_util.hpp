/*
 * Copyright 2026 The nnframe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Shared fixtures for the unit and acceptance suites.

#ifndef NNF_TESTS_TEST_UTIL_HPP_
#define NNF_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "nnf/common.hpp"
#include "nnf/dataset.hpp"

namespace nnf {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("nnf-test-{}-{}", static_cast<long>(::getpid()), counter++);
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

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

/// Random table on the half-star grid: each (user, item) cell present with
/// probability `density`.
inline RatingsTable random_table(Rng& rng, std::size_t users, std::size_t items, double density) {
  std::vector<Rating> rows;
  for (std::size_t u = 1; u <= users; ++u)
    for (std::size_t i = 1; i <= items; ++i)
      if (rng.uniform() < density)
        rows.push_back({static_cast<UserId>(u), static_cast<ItemId>(i),
                        0.5 * static_cast<double>(1 + rng.index(10)),
                        static_cast<std::int64_t>(rng.index(50 * kSecondsPerDay))});
  return RatingsTable(std::move(rows), Scale{});
}

}  // namespace nnf

#endif  // NNF_TESTS_TEST_UTIL_HPP_
