#include "finharness/manifest.hpp"

#include "finharness/common.hpp"

namespace finharness {

RunManifest::RunManifest(std::string command, nlohmann::ordered_json config)
    : command_(std::move(command)), config_(std::move(config)), started_at_(utc_timestamp()) {}

void RunManifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }
void RunManifest::set_count(const std::string& key, std::size_t value) { counts_[key] = value; }
void RunManifest::set_note(const std::string& key, nlohmann::ordered_json value) { notes_[key] = std::move(value); }

void RunManifest::write(const std::filesystem::path& path, int exit_code) {
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      nlohmann::ordered_json entry;
      entry["path"] = p.string();
      if (std::filesystem::is_regular_file(p)) {
        entry["sha256"] = sha256_file(p);
        entry["bytes"] = std::filesystem::file_size(p);
      } else {
        entry["sha256"] = nullptr;
      }
      arr.push_back(entry);
    }
    return arr;
  };
  nlohmann::ordered_json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command_;
  m["exit_code"] = exit_code;
  m["config"] = config_;
  m["counts"] = counts_;
  if (!notes_.empty()) m["notes"] = notes_;
  m["inputs"] = files(inputs_);
  m["outputs"] = files(outputs_);
  m["started_at"] = started_at_;
  m["finished_at"] = utc_timestamp();
  write_file_atomic(path, m.dump(2) + "\n");
}

}  // namespace finharness
