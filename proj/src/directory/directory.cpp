#include "swarmloop/directory/directory.hpp"

#include "swarmloop/directory/jsonpath.hpp"

namespace swarmloop::directory {

namespace {

std::string extract_id(const json& td) {
  if (!td.is_object() || !td.contains("id") || !td["id"].is_string() ||
      td["id"].get<std::string>().empty()) {
    throw DomainError("MalformedSchema", "thing description must carry a non-empty string id",
                      json{{"field", "id"}});
  }
  return td["id"].get<std::string>();
}

}  // namespace

bool Directory::expired(const Entry& e) const {
  return e.ttl_s.has_value() && clock_() - e.updated_at > *e.ttl_s;
}

void Directory::prune() const {
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (expired(it->second)) it = entries_.erase(it);
    else ++it;
  }
}

void Directory::register_td(const json& td, std::optional<double> ttl_s) {
  const auto id = extract_id(td);
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  if (entries_.count(id) != 0) {
    throw DomainError("DuplicateId", "thing already registered: " + id, json{{"id", id}});
  }
  const double now = clock_();
  entries_[id] = Entry{td, now, now, ttl_s};
}

void Directory::update_td(const std::string& id, const json& td, std::optional<double> ttl_s) {
  if (extract_id(td) != id) {
    throw DomainError("MalformedSchema", "document id does not match entry id",
                      json{{"id", id}});
  }
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw DomainError("UnknownId", "no thing registered with id: " + id, json{{"id", id}});
  }
  it->second.td = td;
  it->second.updated_at = clock_();
  if (ttl_s.has_value()) it->second.ttl_s = ttl_s;
}

json Directory::get(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw DomainError("UnknownId", "no thing registered with id: " + id, json{{"id", id}});
  }
  return it->second.td;
}

void Directory::remove(const std::string& id) {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw DomainError("UnknownId", "no thing registered with id: " + id, json{{"id", id}});
  }
  entries_.erase(it);
}

bool Directory::has(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  return entries_.count(id) != 0;
}

std::size_t Directory::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  return entries_.size();
}

std::vector<json> Directory::list() const {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  std::vector<json> out;
  out.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) out.push_back(entry.td);
  return out;
}

std::vector<json> Directory::query(const std::string& expression) const {
  const auto expr = PathExpression::parse(expression);
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  std::vector<json> out;
  for (const auto& [id, entry] : entries_) {
    if (expr.selects(entry.td)) out.push_back(entry.td);
  }
  return out;
}

json Directory::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  prune();
  json entries = json::array();
  for (const auto& [id, e] : entries_) {
    json row{{"td", e.td}, {"registered_at", e.registered_at}, {"updated_at", e.updated_at}};
    if (e.ttl_s.has_value()) row["ttl_s"] = *e.ttl_s;
    entries.push_back(std::move(row));
  }
  return json{{"entries", entries}};
}

void Directory::load_snapshot(const json& snap) {
  std::map<std::string, Entry> loaded;
  for (const auto& row : snap.at("entries")) {
    Entry e;
    e.td = row.at("td");
    e.registered_at = row.at("registered_at").get<double>();
    e.updated_at = row.at("updated_at").get<double>();
    if (row.contains("ttl_s")) e.ttl_s = row["ttl_s"].get<double>();
    loaded[extract_id(e.td)] = std::move(e);
  }
  std::lock_guard<std::mutex> lock(mutex_);
  entries_ = std::move(loaded);
}

}  // namespace swarmloop::directory
