#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace finharness {

inline constexpr const char* kToolName = "finharness";
inline constexpr const char* kToolVersion = FINHARNESS_VERSION;

/// Per-command run record: config snapshot, counts, and content hashes of
/// every input and output. Timestamps live here and nowhere else, so stage
/// outputs stay byte-comparable across reruns.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::ordered_json config);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set_count(const std::string& key, std::size_t value);
  void set_note(const std::string& key, nlohmann::ordered_json value);

  /// Hashes are computed here, after all outputs exist. Written atomically.
  void write(const std::filesystem::path& path, int exit_code);

  const nlohmann::ordered_json& counts() const noexcept { return counts_; }

 private:
  std::string command_;
  nlohmann::ordered_json config_;
  nlohmann::ordered_json counts_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json notes_ = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::string started_at_;
};

}  // namespace finharness
