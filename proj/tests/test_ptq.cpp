#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gen.hpp"
#include "oracles.hpp"
#include "sqel/interp.hpp"
#include "sqel/ptq.hpp"
#include "sqel/query.hpp"

using namespace sqel;
using fixtures::cq;
using fixtures::double_fan_query;
using fixtures::hub_query;
using fixtures::sig_both_trans;
using fixtures::sig_t_s;

namespace {

std::set<std::string> keys_of(const std::vector<CQ>& qs) {
  std::set<std::string> out;
  for (const auto& q : qs) out.insert(cq_key(q));
  return out;
}

std::multiset<std::string> answers_of(const std::vector<CQ>& qs) {
  std::multiset<std::string> out;
  for (const auto& q : qs) out.insert(q.answer_vars.at(0));
  return out;
}

// The four clusters of the branching hub in canonical order.
constexpr size_t kHubC1 = 0;  // {s(x,v1)}
constexpr size_t kHubC2 = 1;  // {s(y,v2)}
constexpr size_t kHubC3 = 2;  // {s(z,v3)}
constexpr size_t kHubC4 = 3;  // the transitive cluster over {u,x,y,z}

}  // namespace

TEST_CASE("cluster trees of the branching hub") {
  Signature sig = sig_t_s();
  CQ q = hub_query();
  std::vector<Cluster> cs = clusters(q, sig);
  REQUIRE(cs.size() == 4);

  SUBCASE("rooted at the transitive cluster") {
    auto t = cluster_tree_for(q, sig, cs[kHubC4]);
    REQUIRE(t.has_value());
    CHECK(t->root == kHubC4);
    CHECK(t->children[kHubC4] == std::vector<size_t>{kHubC1, kHubC2, kHubC3});
    CHECK(t->entry[kHubC1] == "x");
    CHECK(t->entry[kHubC2] == "y");
    CHECK(t->entry[kHubC3] == "z");
    CHECK(t->entry[kHubC4] == "");
    CHECK(t->parent[kHubC4] == -1);
    CHECK(t->subtree(kHubC4) ==
          (std::vector<size_t>{kHubC1, kHubC2, kHubC3, kHubC4}));
  }

  SUBCASE("rooted at the x-spoke") {
    auto t = cluster_tree_for(q, sig, cs[kHubC1]);
    REQUIRE(t.has_value());
    CHECK(t->root == kHubC1);
    CHECK(t->children[kHubC1] == std::vector<size_t>{kHubC4});
    CHECK(t->children[kHubC4] == std::vector<size_t>{kHubC2, kHubC3});
    CHECK(t->entry[kHubC4] == "x");
    CHECK(t->entry[kHubC2] == "y");
    CHECK(t->entry[kHubC3] == "z");
    CHECK(t->subtree(kHubC4) ==
          (std::vector<size_t>{kHubC2, kHubC3, kHubC4}));
  }

  SUBCASE("the y- and z-spokes are not roots") {
    // Their shared variable is not initial in the transitive cluster.
    CHECK_FALSE(cluster_tree_for(q, sig, cs[kHubC2]).has_value());
    CHECK_FALSE(cluster_tree_for(q, sig, cs[kHubC3]).has_value());
  }

  SUBCASE("root clusters") {
    std::vector<Cluster> roots = root_clusters(q, sig);
    REQUIRE(roots.size() == 2);
    CHECK(roots[0] == cs[kHubC1]);
    CHECK(roots[1] == cs[kHubC4]);
  }

  SUBCASE("foreign cluster is rejected") {
    Cluster alien;
    alien.role = "t";
    alien.transitive = true;
    alien.atoms = {binary_atom("t", "a", "b")};
    alien.vars = {"a", "b"};
    CHECK_THROWS_AS((void)cluster_tree_for(q, sig, alien), OpError);
  }
}

TEST_CASE("double fan admits no cluster tree when both roles are transitive") {
  Signature sig = sig_both_trans();
  CQ q = double_fan_query();
  std::vector<Cluster> cs = clusters(q, sig);
  REQUIRE(cs.size() == 4);
  for (const auto& c : cs) CHECK_FALSE(cluster_tree_for(q, sig, c).has_value());
  CHECK(root_clusters(q, sig).empty());
  CHECK_FALSE(is_boolean_ptq(q, sig));
}

TEST_CASE("PTQ recognition") {
  Signature sig = sig_t_s();

  CHECK(is_boolean_ptq(hub_query(), sig));
  CHECK(is_boolean_ptq(cq({binary_atom("t", "x", "y")}), sig));
  CHECK(is_boolean_ptq(cq({unary_atom("A", "x")}), sig));

  // cyclic transitive cluster
  CHECK_FALSE(is_boolean_ptq(
      cq({binary_atom("t", "x", "y"), binary_atom("t", "y", "x")}), sig));
  // disconnected
  CHECK_FALSE(
      is_boolean_ptq(cq({unary_atom("A", "x"), unary_atom("B", "y")}), sig));
  // two clusters sharing two variables: no admissible tree
  CHECK_FALSE(is_boolean_ptq(
      cq({binary_atom("t", "x", "y"), binary_atom("s", "x", "y")}), sig));

  SUBCASE("unary recognition on the hub") {
    CHECK(is_unary_ptq(hub_query({"u"}), sig));
    CHECK_FALSE(is_unary_ptq(hub_query({"x"}), sig));  // x lies in two clusters
    CHECK_FALSE(is_unary_ptq(hub_query({"y"}), sig));
    CHECK_FALSE(is_unary_ptq(hub_query({"z"}), sig));
    CHECK_FALSE(is_unary_ptq(hub_query(), sig));  // Boolean, not unary
  }

  SUBCASE("unary corner cases") {
    CHECK(is_unary_ptq(cq({unary_atom("A", "x")}, {"x"}), sig));
    CHECK(is_unary_ptq(cq({binary_atom("t", "x", "y")}, {"x"}), sig));
    // answer variable must be initial
    CHECK_FALSE(is_unary_ptq(cq({binary_atom("t", "x", "y")}, {"y"}), sig));
  }
}

TEST_CASE("subPTQ enumeration on the branching hub") {
  Signature sig = sig_t_s();
  CQ boolean_hub = hub_query();

  CQ spoke_x = cq({binary_atom("s", "x", "v1")}, {"x"});
  CQ spoke_y = cq({binary_atom("s", "y", "v2")}, {"y"});
  CQ spoke_z = cq({binary_atom("s", "z", "v3")}, {"z"});
  CQ below_x = cq({binary_atom("t", "x", "y"), binary_atom("t", "u", "y"),
                   binary_atom("t", "u", "z"), binary_atom("t", "y", "z"),
                   binary_atom("s", "y", "v2"), binary_atom("s", "z", "v3")},
                  {"x"});

  SUBCASE("Boolean query: four subPTQs over both root clusters") {
    std::vector<CQ> subs = subptqs(boolean_hub, sig);
    REQUIRE(subs.size() == 4);
    CHECK(keys_of(subs) == std::set<std::string>{cq_key(spoke_x),
                                                 cq_key(spoke_y),
                                                 cq_key(spoke_z),
                                                 cq_key(below_x)});
    CHECK(answers_of(subs) == std::multiset<std::string>{"x", "x", "y", "z"});
    for (const auto& s : subs) CHECK(is_unary_ptq(s, sig));
  }

  SUBCASE("unary query: only the tree rooted at the answer cluster") {
    std::vector<CQ> subs = subptqs(hub_query({"u"}), sig);
    REQUIRE(subs.size() == 3);
    CHECK(keys_of(subs) == std::set<std::string>{cq_key(spoke_x),
                                                 cq_key(spoke_y),
                                                 cq_key(spoke_z)});
  }

  SUBCASE("single cluster and atom-only queries have no subPTQs") {
    CHECK(subptqs(cq({binary_atom("t", "x", "y")}), sig).empty());
    CHECK(subptqs(cq({unary_atom("A", "x")}), sig).empty());
    CHECK(subptqs(cq({unary_atom("A", "x")}, {"x"}), sig).empty());
  }

  SUBCASE("non-PTQs are rejected") {
    CHECK_THROWS_AS(
        (void)subptqs(cq({binary_atom("t", "x", "y"),
                          binary_atom("t", "y", "x")}),
                      sig),
        OpError);
    CHECK_THROWS_AS((void)subptqs(double_fan_query(), sig_both_trans()),
                    OpError);
  }

  SUBCASE("unary atoms travel with their variables") {
    CQ q = hub_query();
    q.atoms.push_back(unary_atom("A", "y"));
    q.atoms.push_back(unary_atom("B", "v1"));
    q.canonicalize();
    std::vector<CQ> subs = subptqs(q, sig);
    for (const auto& s : subs) {
      std::set<std::string> vs;
      for (const auto& v : vars_of(s)) vs.insert(v);
      bool has_a = false, has_b = false;
      for (const auto& a : s.atoms) {
        if (!a.binary() && a.pred == "A") has_a = true;
        if (!a.binary() && a.pred == "B") has_b = true;
      }
      CHECK(has_a == (vs.count("y") > 0));
      CHECK(has_b == (vs.count("v1") > 0));
    }
  }
}

TEST_CASE("Boolean compilation on the running examples") {
  Signature sig = sig_t_s();

  SUBCASE("a PTQ with trivial quotient compiles to itself") {
    CQ q = hub_query();
    auto p = compile_boolean_ptq(q, sig);
    REQUIRE(p.has_value());
    CHECK(cq_key(p->query) == cq_key(q));
    REQUIRE(p->tree.has_value());
    // rooted at the least root cluster, the x-spoke
    CHECK(p->tree->root == kHubC1);
    CHECK(p->tree->children[kHubC1] == std::vector<size_t>{kHubC4});
    CHECK(p->tree->children[kHubC4] ==
          (std::vector<size_t>{kHubC2, kHubC3}));
    CHECK(p->tree->entry[kHubC4] == "x");
  }

  SUBCASE("plain fork collapses") {
    CQ q = cq({binary_atom("r", "x", "z"), binary_atom("r", "y", "z"),
               unary_atom("A", "z")});
    Signature rsig;
    rsig.roles = {"r"};
    auto p = compile_boolean_ptq(q, rsig);
    REQUIRE(p.has_value());
    CHECK(cq_key(p->query) ==
          cq_key(cq({binary_atom("r", "x", "z"), unary_atom("A", "z")})));
  }

  SUBCASE("double fan: matchable but not compilable with two transitive roles") {
    Signature both = sig_both_trans();
    CQ q = double_fan_query();
    CHECK(tree_matchable(q, both));
    CHECK_FALSE(compile_boolean_ptq(q, both).has_value());
  }

  SUBCASE("double fan compiles when the plain fans fork-collapse") {
    CQ q = double_fan_query();
    auto p = compile_boolean_ptq(q, sig);  // s is a plain role here
    REQUIRE(p.has_value());
    CHECK(vars_of(p->query).size() == 6);  // x3 merged into x2, x7 into x6
    CHECK(is_boolean_ptq(p->query, sig));
  }

  SUBCASE("directed cycle never compiles") {
    CQ q = cq({binary_atom("t", "x", "y"), binary_atom("t", "y", "x")});
    CHECK_FALSE(compile_boolean_ptq(q, sig).has_value());
    CHECK_FALSE(tree_matchable(q, sig));
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(
        (void)compile_boolean_ptq(
            cq({unary_atom("A", "x"), unary_atom("B", "y")}), sig),
        OpError);
    CHECK_THROWS_AS(
        (void)compile_boolean_ptq(cq({binary_atom("t", "x", "y")}, {"x"}),
                                  sig),
        OpError);
  }
}

TEST_CASE("Boolean compilation agrees with tree matchability") {
  // With a single transitive role the compilation succeeds exactly when the
  // query matches into some transitive tree; the compiled PTQ is then
  // equivalent to the query over such interpretations.
  gen::Alphabet ab;
  ab.concepts = {"A", "B"};
  ab.trans_roles = {"t"};
  ab.plain_roles = {"r", "s"};
  Signature sig = ab.sig();
  Rng rng(0xB001EA9C0117EULL);

  int compiled = 0, rejected = 0;
  for (int iter = 0; iter < 250; ++iter) {
    CQ q = gen::random_connected_cq(2 + static_cast<int>(rng.below(4)), ab,
                                    rng, 2, 2);
    bool matchable = tree_matchable(q, sig);
    auto p = compile_boolean_ptq(q, sig);
    REQUIRE(p.has_value() == matchable);
    if (!p) {
      ++rejected;
      continue;
    }
    ++compiled;
    CHECK(is_boolean_ptq(p->query, sig));
    for (int j = 0; j < 12; ++j) {
      Interpretation i =
          gen::random_transitive_tree(2 + static_cast<int>(rng.below(7)), ab,
                                      rng);
      CHECK(entails_on(i, UCQ{{q}}) == entails_on(i, UCQ{{p->query}}));
    }
  }
  CHECK(compiled > 40);
  CHECK(rejected > 40);
}

TEST_CASE("Boolean compilation with two transitive roles is sound") {
  gen::Alphabet ab;
  ab.concepts = {"A"};
  ab.trans_roles = {"t", "u"};
  ab.plain_roles = {"s"};
  Signature sig = ab.sig();
  Rng rng(0x2E11A9B13ULL);

  int compiled = 0;
  for (int iter = 0; iter < 200; ++iter) {
    CQ q = gen::random_connected_cq(2 + static_cast<int>(rng.below(3)), ab,
                                    rng, 2, 1);
    auto p = compile_boolean_ptq(q, sig);
    if (!p) continue;
    ++compiled;
    CHECK(tree_matchable(q, sig));  // present implies matchable
    CHECK(is_boolean_ptq(p->query, sig));
    for (int j = 0; j < 10; ++j) {
      Interpretation i =
          gen::random_transitive_tree(2 + static_cast<int>(rng.below(6)), ab,
                                      rng);
      CHECK(entails_on(i, UCQ{{q}}) == entails_on(i, UCQ{{p->query}}));
    }
  }
  CHECK(compiled > 30);
}

TEST_CASE("unary compilation on the running examples") {
  Signature sig = sig_t_s();

  SUBCASE("hub rooted at x splits into spoke and remainder") {
    auto ps = compile_unary_ptqs(hub_query({"x"}), sig);
    REQUIRE(ps.has_value());
    REQUIRE(ps->size() == 2);
    CQ spoke = cq({binary_atom("s", "x", "v1")}, {"x"});
    CQ rest = cq({binary_atom("t", "x", "y"), binary_atom("t", "u", "y"),
                  binary_atom("t", "u", "z"), binary_atom("t", "y", "z"),
                  binary_atom("s", "y", "v2"), binary_atom("s", "z", "v3")},
                 {"x"});
    std::set<std::string> got;
    for (const auto& p : *ps) {
      got.insert(cq_key(p.query));
      CHECK(is_unary_ptq(p.query, sig));
      REQUIRE(p.tree.has_value());
    }
    CHECK(got == std::set<std::string>{cq_key(spoke), cq_key(rest)});
  }

  SUBCASE("hub rooted at the initial hub variable is already one PTQ") {
    auto ps = compile_unary_ptqs(hub_query({"u"}), sig);
    REQUIRE(ps.has_value());
    REQUIRE(ps->size() == 1);
    CHECK(cq_key((*ps)[0].query) == cq_key(hub_query({"u"})));
  }

  SUBCASE("non-initial answer variables cannot root a tree match") {
    CHECK_FALSE(compile_unary_ptqs(hub_query({"y"}), sig).has_value());
    CHECK_FALSE(compile_unary_ptqs(hub_query({"z"}), sig).has_value());
    CHECK_FALSE(
        compile_unary_ptqs(cq({binary_atom("t", "x", "y")}, {"y"}), sig)
            .has_value());
  }

  SUBCASE("atom-only query") {
    auto ps = compile_unary_ptqs(cq({unary_atom("A", "x")}, {"x"}), sig);
    REQUIRE(ps.has_value());
    REQUIRE(ps->size() == 1);
    CHECK(cq_key((*ps)[0].query) == cq_key(cq({unary_atom("A", "x")}, {"x"})));
    CHECK_FALSE((*ps)[0].tree.has_value());
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS((void)compile_unary_ptqs(hub_query(), sig), OpError);
    CHECK_THROWS_AS(
        (void)compile_unary_ptqs(
            cq({unary_atom("A", "x"), unary_atom("B", "y")}, {"x"}), sig),
        OpError);
  }
}

TEST_CASE("unary compilation agrees with rooted tree matchability") {
  gen::Alphabet ab;
  ab.concepts = {"A", "B"};
  ab.trans_roles = {"t"};
  ab.plain_roles = {"s"};
  Signature sig = ab.sig();
  Rng rng(0x0051D4EA7ULL);

  int compiled = 0, rejected = 0;
  for (int iter = 0; iter < 220; ++iter) {
    CQ q = gen::random_connected_cq(2 + static_cast<int>(rng.below(3)), ab,
                                    rng, 1, 2, /*unary_answer=*/true);
    bool matchable = oracle::tree_match_exists(q, sig, /*rooted=*/true);
    auto ps = compile_unary_ptqs(q, sig);
    REQUIRE(ps.has_value() == matchable);
    if (!ps) {
      ++rejected;
      continue;
    }
    ++compiled;
    for (const auto& p : *ps) CHECK(is_unary_ptq(p.query, sig));
    for (int j = 0; j < 10; ++j) {
      Interpretation i =
          gen::random_transitive_tree(2 + static_cast<int>(rng.below(6)), ab,
                                      rng);
      bool direct = entails_on(i, UCQ{{q}}, {0});
      bool split = true;
      for (const auto& p : *ps)
        split = split && entails_on(i, UCQ{{p.query}}, {0});
      CHECK(direct == split);
    }
  }
  CHECK(compiled > 30);
  CHECK(rejected > 30);
}

TEST_CASE("every subPTQ of a compiled PTQ is a unary PTQ") {
  gen::Alphabet ab;
  ab.concepts = {"A"};
  ab.trans_roles = {"t"};
  ab.plain_roles = {"r", "s"};
  Signature sig = ab.sig();
  Rng rng(0x5AB97BE57ULL);

  int seen = 0;
  for (int iter = 0; iter < 300; ++iter) {
    CQ q = gen::random_connected_cq(3 + static_cast<int>(rng.below(4)), ab,
                                    rng, 1, 1);
    auto p = compile_boolean_ptq(q, sig);
    if (!p) continue;
    for (const auto& s : subptqs(p->query, sig)) {
      ++seen;
      CHECK(is_unary_ptq(s, sig));
    }
  }
  CHECK(seen > 50);
}

TEST_CASE("treeification of small queries") {
  Signature sig = sig_t_s();

  SUBCASE("a single labeled variable") {
    UCQ u = treeify(cq({unary_atom("A", "x")}, {"x"}), sig);
    REQUIRE(u.cqs.size() == 1);
    CHECK(cq_key(u.cqs[0]) == cq_key(cq({unary_atom("A", "x")}, {"x"})));
  }

  SUBCASE("transitive two-step chain") {
    CQ q = cq({binary_atom("t", "x", "y"), binary_atom("t", "y", "z")}, {"x"});
    UCQ u = treeify(q, sig);
    REQUIRE(u.cqs.size() == 1);  // only the two-edge chain survives
    CQ chain = cq({binary_atom("t", "x", "x_1"), binary_atom("t", "x_1", "x_2")},
                  {"x"});
    CHECK(cq_key(u.cqs[0]) == cq_key(chain));
  }

  SUBCASE("transitive fork grows three shapes") {
    CQ q = cq({binary_atom("t", "x", "y"), binary_atom("t", "u", "y")}, {"x"});
    UCQ u = treeify(q, sig);
    // u may collapse onto x (one edge), sit on the path below x (chain), or
    // branch off separately (star).
    CHECK(u.cqs.size() == 3);
    for (const auto& tq : u.cqs) CHECK(vars_of(tq).size() <= 3);
  }

  SUBCASE("Boolean input is rejected") {
    CHECK_THROWS_AS((void)treeify(hub_query(), sig), OpError);
  }
}

TEST_CASE("treeification is equivalent over small transitive trees") {
  gen::Alphabet ab;
  ab.concepts = {"A"};
  ab.trans_roles = {"t"};
  ab.plain_roles = {"s"};
  Signature sig = ab.sig();
  Rng rng(0x7EE1F1CA710ULL);

  std::vector<std::string> roles = {"s", "t"};
  int positives = 0;
  for (int iter = 0; iter < 40; ++iter) {
    CQ q = gen::random_connected_cq(2 + static_cast<int>(rng.below(2)), ab,
                                    rng, 1, 1, /*unary_answer=*/true);
    const std::string& x = q.answer_vars[0];
    UCQ u = treeify(q, sig);
    for (const auto& tq : u.cqs) {
      CHECK(tq.answer_vars == std::vector<std::string>{x});
      CHECK(vars_of(tq).size() <= vars_of(q).size());
    }

    CQ probe = q;
    probe.answer_vars.clear();
    oracle::for_each_tree(3, roles, [&](const Interpretation& skel) {
      int m = static_cast<int>(skel.labels.size());
      for (uint32_t mask = 0; mask < (1u << m); ++mask) {
        Interpretation tree = skel;
        for (int e = 0; e < m; ++e)
          if (mask >> e & 1) tree.add_label(e, "A");
        Interpretation closed = transitive_closure(tree, sig);
        bool direct = !find_matches(probe, closed, {{x, 0}}, 1).empty();
        bool via_trees = entails_on(closed, u, {0});
        CHECK(direct == via_trees);
        if (direct) ++positives;
      }
      return true;
    });
  }
  CHECK(positives > 50);
}
