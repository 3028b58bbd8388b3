#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wattbench/sweep.hpp"

namespace wattbench {

/// Directory-backed result store: <root>/index.csv listing every run plus
/// <root>/runs/<config_id>.json, one document per run.  Documents embed a
/// schema version; loading a document written by a different schema raises
/// VersionMismatch, and an index row without its document raises StoreCorrupt.
class ResultStore {
 public:
  static constexpr int kSchemaVersion = 1;

  explicit ResultStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Insert or replace one run document and rewrite the index.
  void put(const RunResult& result);

  /// Every stored run, sorted by config_id.  An empty or absent store loads
  /// as an empty list.
  std::vector<RunResult> load_all() const;

  std::optional<RunResult> get(const std::string& config_id) const;

 private:
  std::filesystem::path root_;
};

}  // namespace wattbench
