#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <Eigen/Dense>

#include "headhunt/headbank.hpp"
#include "oracles.hpp"

namespace fixture {

inline Eigen::MatrixXd to_eigen(const oracle::Matrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  }
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("headhunt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// 2 layers x 2 heads, d_h = 3, two prompts, two videos per class.
// Feature value of (video v, prompt p, head k, dim j) = v + 10 p + 100 k + 1000 j
// for normals, negated for abnormals, so every float is easy to check by hand.
inline headhunt::BankManifest tiny_manifest() {
  headhunt::BankManifest m;
  m.model = {"tiny", 2, 2, 3};
  m.prompts = {{"p0", "first prompt"}, {"p1", "second prompt"}};
  m.videos = {{"n0", 0, 1, 48, std::nullopt},
              {"n1", 0, 1, 48, std::nullopt},
              {"a0", 1, 1, 48, std::nullopt},
              {"a1", 1, 1, 48, std::nullopt}};
  return m;
}

inline headhunt::CalibrationFeatureRecord tiny_record(const headhunt::BankManifest& m, std::size_t v,
                                                      std::size_t p) {
  headhunt::CalibrationFeatureRecord r{m.videos[v].id, m.prompts[p].id, {}};
  const double sign = m.videos[v].label ? -1.0 : 1.0;
  for (int k = 0; k < 4; ++k) {
    for (int j = 0; j < 3; ++j) {
      r.features.push_back(static_cast<float>(sign * (static_cast<double>(v) + 10.0 * static_cast<double>(p) +
                                                      100.0 * k + 1000.0 * j)));
    }
  }
  return r;
}

}  // namespace fixture
