#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "clot/observation_set.hpp"
#include "clot/rng.hpp"

namespace clot::test {

/// Two-anchor Gaussian clouds per discrete condition, paired by draw index.
/// `shift` translates every condition's cloud between the anchors.
inline ObservationSet paired_gaussians(int per_group, const std::vector<int>& conds,
                                       const VectorXd& shift, double spread,
                                       Rng& rng) {
  ObservationSet data;
  const Index d = shift.size();
  for (int c : conds) {
    for (int i = 0; i < per_group; ++i) {
      VectorXd y0(d);
      for (Index k = 0; k < d; ++k) y0[k] = c + spread * rng.normal();
      VectorXd y1 = y0 + shift;
      data.add(y0, Condition::discrete(c), 0.0, i);
      data.add(y1, Condition::discrete(c), 1.0, i);
    }
  }
  data.finalize();
  return data;
}

/// Unique path under the system temp directory; the file is not created.
inline std::string temp_path(const std::string& stem) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "clot_tests";
  std::filesystem::create_directories(dir);
  return (dir / (stem + "." + std::to_string(::getpid()) + "." +
                 std::to_string(counter++)))
      .string();
}

inline std::string read_file(const std::string& path) {
  std::string out;
  if (FILE* f = std::fopen(path.c_str(), "rb")) {
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
  }
  return out;
}

}  // namespace clot::test
