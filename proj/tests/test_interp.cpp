#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gen.hpp"
#include "oracles.hpp"
#include "sqel/interp.hpp"
#include "sqel/textio.hpp"

using namespace sqel;

namespace {

Interpretation parse_i(const std::string& s) { return parse_interpretation(s); }

Signature sig_t_s() {
  Signature sig;
  sig.roles = {"t", "s"};
  sig.trans_roles = {"t"};
  return sig;
}

}  // namespace

TEST_CASE("interpretation parse and serialize round-trip") {
  std::string text =
      "elem 1 {A,B}\n"
      "elem 2 {}\n"
      "elem 5 {A}\n"
      "edge t 1 2\n"
      "edge t 2 5\n"
      "edge s 1 5\n"
      "named a 1\n";
  Interpretation i = parse_i(text);
  CHECK(i.size() == 3);
  CHECK(i.ids == std::vector<long long>{1, 2, 5});
  CHECK(i.has_label(0, "A"));
  CHECK(i.has_label(0, "B"));
  CHECK(!i.has_label(1, "A"));
  CHECK(i.has_edge("t", 0, 1));
  CHECK(i.has_edge("s", 0, 2));
  CHECK(i.named.at("a") == 0);
  std::string out = serialize_interpretation(i);
  CHECK(parse_i(out) == i);
}

TEST_CASE("interpretation parse errors") {
  CHECK_THROWS_AS(parse_i("elem 1 {A}\nelem 1 {}\n"), ParseError);
  CHECK_THROWS_AS(parse_i("elem 1 {A}\nedge r 1 2\n"), ParseError);
  CHECK_THROWS_AS(parse_i("named a 7\n"), ParseError);
  CHECK_THROWS_AS(parse_i("elem x {}\n"), ParseError);
  try {
    parse_i("elem 1 {}\nedge r 1 9\n");
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("transitive closure closes chains") {
  Interpretation i = parse_i(
      "elem 0 {}\nelem 1 {}\nelem 2 {}\n"
      "edge t 0 1\nedge t 1 2\nedge s 0 1\nedge s 1 2\n");
  Signature sig = sig_t_s();
  Interpretation c = transitive_closure(i, sig);
  CHECK(c.has_edge("t", 0, 2));
  CHECK(!c.has_edge("s", 0, 2));  // plain roles untouched
  // idempotent
  CHECK(transitive_closure(c, sig) == c);
}

TEST_CASE("transitive closure is monotone (random)") {
  gen::Alphabet ab{{"A"}, {"t"}, {"s"}};
  Rng rng(7);
  for (int it = 0; it < 30; ++it) {
    Interpretation a = gen::random_interp(5, ab, rng);
    Interpretation b = a;
    // add a few extra edges to b
    for (int k = 0; k < 3; ++k)
      b.add_edge("t", (int)rng.below(5), (int)rng.below(5));
    Interpretation ca = transitive_closure(a, ab.sig());
    Interpretation cb = transitive_closure(b, ab.sig());
    for (const auto& [role, es] : ca.edges)
      for (auto e : es) {
        CAPTURE(it);
        CHECK(cb.has_edge(role, e.first, e.second));
      }
  }
}

TEST_CASE("check_model reports CI and transitivity violations") {
  KnowledgeBase kb = parse_kb("trans t\nci A <= (some t B)\n");
  Interpretation good = parse_i("elem 0 {A}\nelem 1 {B}\nedge t 0 1\n");
  CHECK(check_model(good, kb.tbox, kb.sig).ok());

  Interpretation bad = parse_i("elem 0 {A}\nelem 1 {}\nedge t 0 1\n");
  auto rep = check_model(bad, kb.tbox, kb.sig);
  REQUIRE(!rep.ok());
  CHECK(rep.violations[0].kind == ModelViolation::Kind::CI);

  Interpretation open_chain =
      parse_i("elem 0 {A}\nelem 1 {B}\nelem 2 {B}\nedge t 0 1\nedge t 1 2\n");
  auto rep2 = check_model(open_chain, kb.tbox, kb.sig);
  REQUIRE(!rep2.ok());
  CHECK(rep2.violations[0].kind == ModelViolation::Kind::Transitivity);
}

TEST_CASE("check_model_abox") {
  ABox a;
  a.concept_asserts = {{"A", "a"}};
  a.role_asserts = {{"t", "a", "b"}};
  Interpretation i = parse_i(
      "elem 0 {A}\nelem 1 {}\nedge t 0 1\nnamed a 0\nnamed b 1\n");
  CHECK(check_model_abox(i, a).ok());
  Interpretation j = parse_i("elem 0 {A}\nnamed a 0\n");
  auto rep = check_model_abox(j, a);
  REQUIRE(!rep.ok());
  CHECK(rep.violations[0].kind == ModelViolation::Kind::MissingIndividual);
}

TEST_CASE("check_local evaluates inclusions at one element") {
  KnowledgeBase kb = parse_kb(
      "trans t\n"
      "ci A <= (some t B)\n"
      "ci B <= (some t B)\n");
  NormalTBox t = normalize(kb.tbox).tbox;
  Interpretation i = parse_i("elem 0 {A}\nelem 1 {B}\nelem 2 {B}\nedge t 0 1\n");
  CHECK(check_local(i, 0, t).ok());
  CHECK(!check_local(i, 1, t).ok());  // 1 has B but no t-successor
  CHECK(check_local(i, 2, t).ok() == false);
  Interpretation j = parse_i("elem 0 {A}\nelem 1 {B}\nedge t 0 1\nedge t 1 1\n");
  CHECK(check_local(j, 1, t).ok());
}

TEST_CASE("find_matches agrees with the enumeration oracle") {
  gen::Alphabet ab{{"A", "B"}, {"t"}, {"s"}};
  Rng rng(11);
  int nontrivial = 0;
  for (int it = 0; it < 120; ++it) {
    Interpretation i = gen::random_interp(2 + (int)rng.below(4), ab, rng);
    CQ q = gen::random_connected_cq(1 + (int)rng.below(4), ab, rng);
    auto got = find_matches(q, i);
    auto want = oracle::all_matches(q, i);
    std::set<Match> gotset(got.begin(), got.end());
    CAPTURE(it);
    CAPTURE(serialize_interpretation(i));
    CAPTURE(cq_key(q));
    CHECK(gotset == want);
    CHECK(got.size() == gotset.size());  // no duplicates from the search
    if (!want.empty()) ++nontrivial;
  }
  CHECK(nontrivial > 20);
}

TEST_CASE("find_matches respects seeds and limits") {
  Interpretation i = parse_i(
      "elem 0 {A}\nelem 1 {A}\nelem 2 {B}\nedge s 0 2\nedge s 1 2\n");
  CQ q;
  q.atoms = {unary_atom("A", "x"), binary_atom("s", "x", "y")};
  q.canonicalize();

  auto all = find_matches(q, i);
  CHECK(all.size() == 2);

  Match seed{{"x", 1}};
  auto seeded = find_matches(q, i, seed);
  REQUIRE(seeded.size() == 1);
  CHECK(seeded[0].at("x") == 1);
  CHECK(seeded[0].at("y") == 2);

  CHECK(find_matches(q, i, {}, 1).size() == 1);
  CHECK_THROWS_AS(find_matches(q, i, Match{{"z", 0}}), OpError);
  CHECK_THROWS_AS(find_matches(q, i, Match{{"x", 99}}), OpError);

  // seeds must respect unary atoms
  Match seed_b{{"x", 2}};
  CHECK(find_matches(q, i, seed_b).empty());
}

TEST_CASE("find_matches with absent symbols") {
  Interpretation i = parse_i("elem 0 {A}\n");
  CQ q;
  q.atoms = {unary_atom("Z", "x")};
  CHECK(find_matches(q, i).empty());
  CQ q2;
  q2.atoms = {binary_atom("nowhere", "x", "y")};
  CHECK(find_matches(q2, i).empty());
}

TEST_CASE("entails_on binds answers positionally") {
  Interpretation i = parse_i(
      "elem 0 {A}\nelem 1 {B}\nedge s 0 1\nnamed a 0\nnamed b 1\n");
  CQ q;
  q.name = "q";
  q.answer_vars = {"x"};
  q.atoms = {binary_atom("s", "x", "y")};
  UCQ u{{q}};
  CHECK(entails_on(i, u, {0}));
  CHECK(!entails_on(i, u, {1}));
  CHECK_THROWS_AS(entails_on(i, u, {}), OpError);
}

TEST_CASE("classify_shape identifies trees") {
  Interpretation i = parse_i(
      "elem 0 {}\nelem 1 {}\nelem 2 {}\nedge t 0 1\nedge s 0 2\n");
  auto rep = classify_shape(i, sig_t_s());
  CHECK(rep.shape == ShapeClass::Tree);
  CHECK(rep.root == 0);
}

TEST_CASE("classify_shape identifies transitive trees with unique generator") {
  Interpretation base = parse_i(
      "elem 0 {}\nelem 1 {}\nelem 2 {}\nelem 3 {}\n"
      "edge t 0 1\nedge t 1 2\nedge s 2 3\n");
  Signature sig = sig_t_s();
  Interpretation closed = transitive_closure(base, sig);
  auto rep = classify_shape(closed, sig);
  CHECK(rep.shape == ShapeClass::TransitiveTree);
  CHECK(rep.root == 0);
  CHECK(canonicalize(rep.underlying) == canonicalize(base));
}

TEST_CASE("classify_shape identifies theta forests") {
  // two named roots, a core cycle between them, and trees below
  Interpretation base = parse_i(
      "elem 0 {}\nelem 1 {}\nelem 2 {}\nelem 3 {}\nelem 4 {}\n"
      "edge t 0 1\nedge t 1 0\nedge s 0 1\n"
      "edge t 0 2\nedge t 2 3\nedge s 1 4\n"
      "named a 0\nnamed b 1\n");
  Signature sig = sig_t_s();
  Interpretation closed = transitive_closure(base, sig);
  auto rep = classify_shape(closed, sig);
  CHECK(rep.shape == ShapeClass::ThetaForest);
  CHECK(rep.theta == std::set<std::string>{"a", "b"});
}

TEST_CASE("classify_shape rejects other shapes") {
  SUBCASE("diamond") {
    Interpretation i = parse_i(
        "elem 0 {}\nelem 1 {}\nelem 2 {}\nelem 3 {}\n"
        "edge s 0 1\nedge s 0 2\nedge s 1 3\nedge s 2 3\n");
    CHECK(classify_shape(i, sig_t_s()).shape == ShapeClass::Other);
  }
  SUBCASE("parallel roles between one pair") {
    Interpretation i = parse_i("elem 0 {}\nelem 1 {}\nedge s 0 1\nedge t 0 1\n");
    CHECK(classify_shape(i, sig_t_s()).shape == ShapeClass::Other);
  }
  SUBCASE("anonymous edges into a named element") {
    Interpretation i = parse_i(
        "elem 0 {}\nelem 1 {}\nelem 2 {}\nedge s 1 0\nedge s 2 0\nnamed a 0\n");
    CHECK(classify_shape(i, sig_t_s()).shape == ShapeClass::Other);
  }
}

TEST_CASE("random shapes classify as generated") {
  gen::Alphabet ab{{"A"}, {"t"}, {"s"}};
  Rng rng(23);
  for (int it = 0; it < 40; ++it) {
    Interpretation tr = gen::random_transitive_tree(1 + (int)rng.below(8), ab, rng);
    auto rep = classify_shape(tr, ab.sig());
    CAPTURE(serialize_interpretation(tr));
    bool tree_like = rep.shape == ShapeClass::Tree ||
                     rep.shape == ShapeClass::TransitiveTree;
    CHECK(tree_like);
  }
  for (int it = 0; it < 40; ++it) {
    Interpretation th = gen::random_theta_forest(6, 2, ab, rng);
    auto rep = classify_shape(th, ab.sig());
    CAPTURE(serialize_interpretation(th));
    bool ok = rep.shape != ShapeClass::Other;
    CHECK(ok);
  }
}

TEST_CASE("unravel expands a self-loop into a chain") {
  Interpretation i = parse_i("elem 0 {A}\nedge t 0 0\n");
  Unraveling u = unravel(i, 0, 3);
  CHECK(u.interp.size() == 4);
  CHECK(u.interp.has_label(0, "A"));
  CHECK(u.interp.has_label(3, "A"));
  CHECK(u.interp.has_edge("t", 0, 1));
  CHECK(u.interp.has_edge("t", 1, 2));
  CHECK(u.interp.has_edge("t", 2, 3));
  CHECK(u.parent[3] == 2);
  CHECK(u.base[3] == 0);
}

TEST_CASE("unravel separates paths") {
  Interpretation i = parse_i(
      "elem 0 {}\nelem 1 {B}\nedge t 0 1\nedge s 0 1\n");
  Unraveling u = unravel(i, 0, 2);
  // two children of the root (one per role), no grandchildren
  CHECK(u.interp.size() == 3);
  CHECK(u.interp.has_edge("s", 0, 1));
  CHECK(u.interp.has_edge("t", 0, 2));
  CHECK(u.interp.has_label(1, "B"));
  CHECK(u.interp.has_label(2, "B"));
  auto rep = classify_shape(u.interp, sig_t_s());
  CHECK(rep.shape == ShapeClass::Tree);
}
