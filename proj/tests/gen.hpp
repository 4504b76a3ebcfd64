#pragma once

// Deterministic random generators for test fixtures: interpretations of
// various shapes and conjunctive queries over small alphabets.

#include <string>
#include <vector>

#include "sqel/interp.hpp"
#include "sqel/query.hpp"
#include "sqel/util.hpp"

namespace sqel::gen {

struct Alphabet {
  std::vector<std::string> concepts;
  std::vector<std::string> trans_roles;
  std::vector<std::string> plain_roles;

  Signature sig() const {
    Signature s;
    s.concepts.insert(concepts.begin(), concepts.end());
    for (const auto& r : trans_roles) {
      s.roles.insert(r);
      s.trans_roles.insert(r);
    }
    s.roles.insert(plain_roles.begin(), plain_roles.end());
    return s;
  }
  std::vector<std::string> all_roles() const {
    std::vector<std::string> rs = trans_roles;
    rs.insert(rs.end(), plain_roles.begin(), plain_roles.end());
    return rs;
  }
};

inline void random_labels(Interpretation& i, const Alphabet& ab, Rng& rng,
                          uint64_t label_den = 2) {
  for (int e = 0; e < i.size(); ++e)
    for (const auto& c : ab.concepts)
      if (rng.chance(1, label_den)) i.add_label(e, c);
}

/// Random tree-shaped interpretation with n nodes: node k>0 gets a parent
/// among 0..k-1 and one role label; no parallel edges by construction.
inline Interpretation random_tree(int n, const Alphabet& ab, Rng& rng) {
  Interpretation i;
  auto roles = ab.all_roles();
  for (int e = 0; e < n; ++e) i.add_element(e, {});
  for (int e = 1; e < n; ++e) {
    int p = static_cast<int>(rng.below(e));
    const std::string& r = roles[rng.below(roles.size())];
    i.add_edge(r, p, e);
  }
  random_labels(i, ab, rng);
  return i;
}

/// Transitive closure of a random tree.
inline Interpretation random_transitive_tree(int n, const Alphabet& ab,
                                             Rng& rng) {
  return transitive_closure(random_tree(n, ab, rng), ab.sig());
}

/// Theta-forest: k named roots with arbitrary core edges, trees of total
/// size n hanging below them, then closed under transitivity.
inline Interpretation random_theta_forest(int n, int k, const Alphabet& ab,
                                          Rng& rng) {
  Interpretation i;
  auto roles = ab.all_roles();
  for (int e = 0; e < n; ++e) i.add_element(e, {});
  for (int a = 0; a < k; ++a) i.named["ind" + std::to_string(a)] = a;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (rng.chance(1, 4)) {
        const std::string& r = roles[rng.below(roles.size())];
        i.add_edge(r, a, b);
      }
  for (int e = k; e < n; ++e) {
    int p = static_cast<int>(rng.below(e));
    const std::string& r = roles[rng.below(roles.size())];
    i.add_edge(r, p, e);
  }
  random_labels(i, ab, rng);
  return transitive_closure(i, ab.sig());
}

/// Arbitrary random interpretation (any shape).
inline Interpretation random_interp(int n, const Alphabet& ab, Rng& rng,
                                    uint64_t edge_den = 4) {
  Interpretation i;
  for (int e = 0; e < n; ++e) i.add_element(e, {});
  for (const auto& r : ab.all_roles())
    for (int e = 0; e < n; ++e)
      for (int f = 0; f < n; ++f)
        if (rng.chance(1, edge_den)) i.add_edge(r, e, f);
  random_labels(i, ab, rng);
  return i;
}

/// Random connected CQ over nv variables: a random spanning tree of binary
/// atoms plus a few extra binary and unary atoms.
inline CQ random_connected_cq(int nv, const Alphabet& ab, Rng& rng,
                              int extra_binary = 2, int extra_unary = 2,
                              bool unary_answer = false) {
  CQ q;
  q.name = "q";
  auto roles = ab.all_roles();
  std::vector<std::string> vars;
  for (int k = 0; k < nv; ++k) vars.push_back("x" + std::to_string(k));
  for (int k = 1; k < nv; ++k) {
    int p = static_cast<int>(rng.below(k));
    const std::string& r = roles[rng.below(roles.size())];
    if (rng.chance(1, 2))
      q.atoms.push_back(binary_atom(r, vars[p], vars[k]));
    else
      q.atoms.push_back(binary_atom(r, vars[k], vars[p]));
  }
  for (int k = 0; k < extra_binary; ++k) {
    if (!rng.chance(1, 2)) continue;
    const std::string& r = roles[rng.below(roles.size())];
    q.atoms.push_back(binary_atom(r, vars[rng.below(vars.size())],
                                  vars[rng.below(vars.size())]));
  }
  for (int k = 0; k < extra_unary; ++k) {
    if (!rng.chance(1, 2) || ab.concepts.empty()) continue;
    q.atoms.push_back(unary_atom(ab.concepts[rng.below(ab.concepts.size())],
                                 vars[rng.below(vars.size())]));
  }
  if (q.atoms.empty()) {
    std::string c = ab.concepts.empty() ? "A" : ab.concepts[0];
    q.atoms.push_back(unary_atom(c, vars[0]));
  }
  if (unary_answer) q.answer_vars.push_back(vars[rng.below(vars.size())]);
  q.canonicalize();
  return q;
}

}  // namespace sqel::gen
