#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace ztc {

// One class in the hierarchy. Multi-parent nodes are allowed (the hierarchy
// is a forest-like DAG, not necessarily a forest).
struct ClassNode {
  std::string id;
  std::string name;
  std::string definition;
  std::vector<std::string> parent_ids;  // empty for roots; kept sorted
};

// Immutable after construction; safe for unrestricted concurrent reads.
class Taxonomy {
 public:
  Taxonomy() = default;

  // Validates: unique ids, non-empty names, resolvable parents, acyclicity.
  // Throws DataError naming the offending class on violation. Nodes are kept
  // sorted by id; parent and child lists are sorted by id.
  static Taxonomy from_nodes(std::vector<ClassNode> nodes);

  static Taxonomy load(const std::string& path);
  void save(const std::string& path) const;

  size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const ClassNode& node(const std::string& id) const;
  const std::vector<ClassNode>& nodes() const { return nodes_; }

  std::vector<std::string> roots() const;
  std::vector<std::string> leaves() const;
  const std::vector<std::string>& children(const std::string& id) const;
  std::vector<std::string> descendants(const std::string& id) const;
  std::vector<std::string> siblings(const std::string& id) const;

  // Lexicographically smallest ancestor root of id (id itself when a root).
  std::string root_of(const std::string& id) const;

  // "Name: {name}, Definition: {definition}". Field content is passed through
  // verbatim; rendering is model input, not a parseable format.
  static std::string render_class(const ClassNode& node);

 private:
  size_t pos(const std::string& id) const;

  std::vector<ClassNode> nodes_;                      // sorted by id
  std::unordered_map<std::string, size_t> index_;     // id -> position
  std::vector<std::vector<std::string>> children_;    // aligned with nodes_, sorted
};

}  // namespace ztc
