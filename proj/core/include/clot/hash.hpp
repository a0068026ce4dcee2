#pragma once

#include <cstdint>
#include <string>

namespace clot {

/// Incremental SHA-256, used to fingerprint datasets and artifact payloads.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  /// Finishes and returns the lowercase hex digest.  The object must not be
  /// updated afterwards.
  std::string hex_digest();

  static std::string of_string(const std::string& s);
  static std::string of_file(const std::string& path);

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint64_t bit_len_ = 0;
  std::uint8_t buffer_[64];
  std::size_t buffer_len_ = 0;
  bool finished_ = false;
};

}  // namespace clot
