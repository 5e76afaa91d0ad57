#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ztc/errors.hpp"
#include "ztc/rng.hpp"
#include "ztc/taxonomy.hpp"

using namespace ztc;

namespace {

ClassNode node(std::string id, std::vector<std::string> parents) {
  ClassNode n;
  n.id = id;
  n.name = "name of " + id;
  n.definition = "definition of " + id;
  n.parent_ids = std::move(parents);
  return n;
}

Taxonomy two_trees() {
  return Taxonomy::from_nodes({node("A", {}), node("A1", {"A"}), node("A2", {"A"}),
                               node("B", {}), node("B1", {"B"})});
}

std::set<std::string> as_set(const std::vector<std::string>& v) {
  return std::set<std::string>(v.begin(), v.end());
}

// Fixed-point expansion of the children relation, independent of the
// traversal the library uses.
std::set<std::string> descendants_bruteforce(const Taxonomy& t, const std::string& id) {
  std::set<std::string> out;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& n : t.nodes()) {
      for (const auto& p : n.parent_ids) {
        if ((p == id || out.count(p)) && !out.count(n.id) && n.id != id) {
          out.insert(n.id);
          grew = true;
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("structure queries on a two-tree forest") {
  Taxonomy t = two_trees();
  CHECK(as_set(t.roots()) == std::set<std::string>{"A", "B"});
  CHECK(as_set(t.leaves()) == std::set<std::string>{"A1", "A2", "B1"});
  CHECK(as_set(t.descendants("A")) == std::set<std::string>{"A1", "A2"});
  CHECK(t.descendants("A1").empty());
  CHECK(as_set(t.siblings("A1")) == std::set<std::string>{"A2"});
  CHECK(t.siblings("B1").empty());
  CHECK(as_set(t.children("A")) == std::set<std::string>{"A1", "A2"});
  CHECK(t.root_of("A2") == "A");
  CHECK(t.root_of("B") == "B");
  CHECK(t.node("A1").name == "name of A1");
  CHECK_THROWS_AS(t.node("nope"), DataError);
  CHECK_THROWS_AS(t.descendants("nope"), DataError);
  CHECK_THROWS_AS(t.siblings("nope"), DataError);
}

TEST_CASE("multi-parent sibling union") {
  Taxonomy t = Taxonomy::from_nodes({node("A", {}), node("B", {}), node("C", {"A", "B"}),
                                     node("A1", {"A"}), node("B1", {"B"})});
  CHECK(as_set(t.siblings("C")) == std::set<std::string>{"A1", "B1"});
  auto d = as_set(t.descendants("A"));
  CHECK(d == std::set<std::string>{"A1", "C"});
}

TEST_CASE("validation rejects malformed taxonomies") {
  CHECK_THROWS_AS(Taxonomy::from_nodes({node("A", {}), node("A", {})}), DataError);
  CHECK_THROWS_AS(Taxonomy::from_nodes({node("A1", {"Z"})}), DataError);
  CHECK_THROWS_AS(Taxonomy::from_nodes({node("A", {"B"}), node("B", {"A"})}), DataError);
  CHECK_THROWS_AS(Taxonomy::from_nodes({node("A", {"A"})}), DataError);
  ClassNode unnamed = node("A", {});
  unnamed.name = "";
  CHECK_THROWS_AS(Taxonomy::from_nodes({unnamed}), DataError);
  // error message names the offending class
  try {
    Taxonomy::from_nodes({node("A1", {"Z"})});
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("A1") != std::string::npos);
  }
}

TEST_CASE("isolated nodes are both roots and leaves") {
  Taxonomy t = Taxonomy::from_nodes({node("solo", {}), node("A", {}), node("A1", {"A"})});
  CHECK(as_set(t.roots()) == std::set<std::string>{"A", "solo"});
  CHECK(as_set(t.leaves()) == std::set<std::string>{"A1", "solo"});
  CHECK(t.descendants("solo").empty());
  CHECK(t.root_of("solo") == "solo");
}

TEST_CASE("descendants equals the brute-force fixed point on random DAGs") {
  Rng rng(1000);
  for (int trial = 0; trial < 40; ++trial) {
    const size_t n = 2 + rng.index(49);
    std::vector<ClassNode> nodes;
    std::vector<std::string> ids;
    for (size_t i = 0; i < n; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "n%02zu", i);
      ids.push_back(buf);
    }
    // parents only point at lower indices: acyclic by construction
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::string> parents;
      if (i > 0) {
        const size_t np = rng.index(std::min<size_t>(i, 3) + 1);
        auto picks = rng.sample_without_replacement(i, np);
        for (size_t p : picks) parents.push_back(ids[p]);
      }
      nodes.push_back(node(ids[i], parents));
    }
    Taxonomy t = Taxonomy::from_nodes(nodes);
    for (const auto& id : ids)
      CHECK(as_set(t.descendants(id)) == descendants_bruteforce(t, id));
  }
}

TEST_CASE("render_class follows the template exactly") {
  ClassNode n;
  n.id = "x";
  n.name = "Nurse Practitioners";
  n.definition = "Provides advanced care.";
  CHECK(Taxonomy::render_class(n) ==
        "Name: Nurse Practitioners, Definition: Provides advanced care.");
  CHECK(Taxonomy::render_class(n) == Taxonomy::render_class(n));
  n.name = "X";
  n.definition = "";
  CHECK(Taxonomy::render_class(n) == "Name: X, Definition: ");
}

TEST_CASE("json round trip preserves structure") {
  Taxonomy t = Taxonomy::from_nodes({node("A", {}), node("A1", {"A"}), node("C", {"A", "A1"})});
  const std::string path = "test_taxonomy_roundtrip.json";
  t.save(path);
  Taxonomy back = Taxonomy::load(path);
  CHECK(back.size() == t.size());
  for (const auto& n : t.nodes()) {
    const ClassNode& b = back.node(n.id);
    CHECK(b.name == n.name);
    CHECK(b.definition == n.definition);
    CHECK(b.parent_ids == n.parent_ids);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(Taxonomy::load("does_not_exist.json"), DataError);

  // malformed file → parse error
  const std::string bad = "test_taxonomy_bad.json";
  {
    std::ofstream out(bad);
    out << "{not json";
  }
  CHECK_THROWS_AS(Taxonomy::load(bad), DataError);
  std::remove(bad.c_str());
}
