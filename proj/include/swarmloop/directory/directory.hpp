#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmloop/common.hpp"

namespace swarmloop::directory {

/// Registry of Thing Description documents with optional per-entry TTL.
/// Time comes from an injected clock so the runtime can drive expiry from
/// simulation time and tests can advance it manually. Expiry is lazy: an
/// expired entry is invisible to get/list/query and dropped on next touch.
///
/// All operations lock one internal mutex, so queries see a consistent
/// snapshot of the store.
class Directory {
public:
  using Clock = std::function<double()>;

  Directory() : clock_([] { return 0.0; }) {}
  explicit Directory(Clock clock) : clock_(std::move(clock)) {}

  /// Throws DuplicateId if a live entry with the same id exists.
  /// The document must carry a non-empty string "id" field.
  void register_td(const json& td, std::optional<double> ttl_s = std::nullopt);

  /// Replaces the stored document and bumps updated_at. A ttl, when given,
  /// replaces the previous one; omitted keeps it. Throws UnknownId.
  void update_td(const std::string& id, const json& td,
                 std::optional<double> ttl_s = std::nullopt);

  /// Throws UnknownId for absent or expired entries.
  json get(const std::string& id) const;
  void remove(const std::string& id);

  bool has(const std::string& id) const;
  std::size_t size() const;

  /// Live documents ordered by id.
  std::vector<json> list() const;

  /// Live documents the path expression selects at least one node of.
  /// "$" matches everything. Throws MalformedExpression.
  std::vector<json> query(const std::string& expression) const;

  json snapshot() const;
  /// Replaces the whole store with the entries of a snapshot() document.
  void load_snapshot(const json& snap);

private:
  struct Entry {
    json td;
    double registered_at = 0.0;
    double updated_at = 0.0;
    std::optional<double> ttl_s;
  };

  bool expired(const Entry& e) const;
  void prune() const;  // caller holds mutex_

  Clock clock_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, Entry> entries_;
};

}  // namespace swarmloop::directory
