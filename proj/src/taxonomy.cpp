#include "ztc/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <queue>

#include "json.hpp"
#include "ztc/errors.hpp"

namespace ztc {

Taxonomy Taxonomy::from_nodes(std::vector<ClassNode> nodes) {
  Taxonomy t;
  std::sort(nodes.begin(), nodes.end(),
            [](const ClassNode& a, const ClassNode& b) { return a.id < b.id; });
  for (size_t i = 0; i + 1 < nodes.size(); ++i) {
    if (nodes[i].id == nodes[i + 1].id) {
      throw DataError("taxonomy: duplicate class_id '" + nodes[i].id + "'");
    }
  }
  for (auto& n : nodes) {
    if (n.name.empty()) throw DataError("taxonomy: class '" + n.id + "' has empty name");
    std::sort(n.parent_ids.begin(), n.parent_ids.end());
    n.parent_ids.erase(std::unique(n.parent_ids.begin(), n.parent_ids.end()),
                       n.parent_ids.end());
  }
  t.nodes_ = std::move(nodes);
  for (size_t i = 0; i < t.nodes_.size(); ++i) t.index_[t.nodes_[i].id] = i;

  t.children_.assign(t.nodes_.size(), {});
  for (const auto& n : t.nodes_) {
    for (const auto& p : n.parent_ids) {
      auto it = t.index_.find(p);
      if (it == t.index_.end()) {
        throw DataError("taxonomy: class '" + n.id + "' lists unknown parent '" + p + "'");
      }
      t.children_[it->second].push_back(n.id);
    }
  }
  for (auto& c : t.children_) std::sort(c.begin(), c.end());

  // Kahn's algorithm over the parent relation; leftover edges mean a cycle.
  std::vector<size_t> pending(t.nodes_.size());
  std::queue<size_t> ready;
  for (size_t i = 0; i < t.nodes_.size(); ++i) {
    pending[i] = t.nodes_[i].parent_ids.size();
    if (pending[i] == 0) ready.push(i);
  }
  size_t visited = 0;
  while (!ready.empty()) {
    const size_t i = ready.front();
    ready.pop();
    ++visited;
    for (const auto& child : t.children_[i]) {
      const size_t c = t.index_.at(child);
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (visited != t.nodes_.size()) {
    for (size_t i = 0; i < t.nodes_.size(); ++i) {
      if (pending[i] > 0) {
        throw DataError("taxonomy: cycle detected involving class '" + t.nodes_[i].id + "'");
      }
    }
  }
  return t;
}

Taxonomy Taxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("taxonomy: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("taxonomy: parse failure in '" + path + "': " + e.what());
  }
  if (!doc.is_array()) throw DataError("taxonomy: '" + path + "' must be a JSON array");
  std::vector<ClassNode> nodes;
  nodes.reserve(doc.size());
  for (const auto& item : doc) {
    ClassNode n;
    try {
      n.id = item.at("id").get<std::string>();
      n.name = item.at("name").get<std::string>();
      n.definition = item.value("definition", std::string());
      if (item.contains("parents")) {
        n.parent_ids = item.at("parents").get<std::vector<std::string>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("taxonomy: bad node record in '" + path + "': " + e.what());
    }
    nodes.push_back(std::move(n));
  }
  return from_nodes(std::move(nodes));
}

void Taxonomy::save(const std::string& path) const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& n : nodes_) {
    doc.push_back({{"id", n.id},
                   {"name", n.name},
                   {"definition", n.definition},
                   {"parents", n.parent_ids}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("taxonomy: cannot write '" + path + "'");
  out << doc.dump(2) << "\n";
}

size_t Taxonomy::pos(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("taxonomy: unknown class_id '" + id + "'");
  return it->second;
}

const ClassNode& Taxonomy::node(const std::string& id) const { return nodes_[pos(id)]; }

std::vector<std::string> Taxonomy::roots() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.parent_ids.empty()) out.push_back(n.id);
  }
  return out;
}

std::vector<std::string> Taxonomy::leaves() const {
  std::vector<std::string> out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (children_[i].empty()) out.push_back(nodes_[i].id);
  }
  return out;
}

const std::vector<std::string>& Taxonomy::children(const std::string& id) const {
  return children_[pos(id)];
}

std::vector<std::string> Taxonomy::descendants(const std::string& id) const {
  std::set<std::string> seen;
  std::vector<std::string> stack = children_[pos(id)];
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    const auto& kids = children_[pos(cur)];
    stack.insert(stack.end(), kids.begin(), kids.end());
  }
  return {seen.begin(), seen.end()};
}

std::vector<std::string> Taxonomy::siblings(const std::string& id) const {
  std::set<std::string> out;
  for (const auto& p : nodes_[pos(id)].parent_ids) {
    for (const auto& c : children_[pos(p)]) {
      if (c != id) out.insert(c);
    }
  }
  return {out.begin(), out.end()};
}

std::string Taxonomy::root_of(const std::string& id) const {
  std::string cur = id;
  while (true) {
    const ClassNode& n = nodes_[pos(cur)];
    if (n.parent_ids.empty()) return cur;
    cur = n.parent_ids.front();  // parents are sorted; smallest wins
  }
}

std::string Taxonomy::render_class(const ClassNode& node) {
  return "Name: " + node.name + ", Definition: " + node.definition;
}

}  // namespace ztc
