#include "sqel/countermodel.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sqel/util.hpp"

namespace sqel {

namespace {

std::string render_match(const Match& m) {
  std::string s = "{";
  bool first = true;
  for (const auto& [v, id] : m) {
    if (!first) s += ", ";
    first = false;
    s += v + "->" + std::to_string(id);
  }
  return s + "}";
}

/// The one role name occurring across i, q, and (optionally) tbox. Empty if
/// no role occurs anywhere; must be transitive in sig otherwise.
std::string single_role_of(const Interpretation& i, const Signature& sig,
                           const NormalTBox* tbox, const UCQ& q) {
  std::set<std::string> roles;
  for (const auto& [r, es] : i.edges)
    if (!es.empty()) roles.insert(r);
  if (tbox)
    for (const auto& r : role_names_of(*tbox)) roles.insert(r);
  for (const auto& d : q.cqs)
    for (const auto& r : role_names_of(d)) roles.insert(r);
  if (roles.size() > 1) {
    std::string list;
    for (const auto& r : roles) list += (list.empty() ? "" : ", ") + r;
    throw OpError("expected a single role but found: " + list);
  }
  if (roles.empty()) return "";
  const std::string role = *roles.begin();
  if (!sig.is_transitive(role))
    throw OpError("the role " + role + " is not declared transitive");
  return role;
}

void validate_union(const UCQ& q) {
  for (const auto& d : q.cqs) {
    if (!d.boolean())
      throw OpError("disjunct " + cq_key(d) + " is not Boolean");
    if (!graph_info(d).acyclic)
      throw OpError("disjunct " + cq_key(d) + " has a directed cycle");
  }
}

/// Direct-successor structure of a transitively closed tree. `below` holds
/// the closed out-neighborhoods (all strict descendants).
struct TreeParts {
  int root = -1;
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<std::vector<int>> below;
};

TreeParts closed_tree_parts(const Interpretation& i, const Signature& sig,
                            const std::string& role) {
  const int n = i.size();
  if (n == 0) throw OpError("the interpretation is empty");
  TreeParts tp;
  tp.parent.assign(n, -1);
  tp.children.resize(n);
  tp.below.resize(n);
  if (!role.empty())
    for (int a = 0; a < n; ++a) tp.below[a] = i.out_neighbors(role, a);

  for (int a = 0; a < n; ++a)
    if (std::binary_search(tp.below[a].begin(), tp.below[a].end(), a))
      throw OpError("element " + std::to_string(i.ids[a]) +
                    " has a self-edge; the input must be a tree");
  for (int a = 0; a < n; ++a)
    for (int b : tp.below[a])
      for (int c : tp.below[b])
        if (!std::binary_search(tp.below[a].begin(), tp.below[a].end(), c))
          throw OpError("the role extent is not transitively closed: " +
                        std::to_string(i.ids[a]) + " -> " +
                        std::to_string(i.ids[b]) + " -> " +
                        std::to_string(i.ids[c]) + " lacks the closing edge");

  std::vector<int> roots;
  for (int a = 0; a < n; ++a)
    if (role.empty() || i.in_neighbors(role, a).empty()) roots.push_back(a);
  if (roots.size() != 1)
    throw OpError("a transitively closed tree has exactly one element "
                  "without predecessors; found " +
                  std::to_string(roots.size()));
  tp.root = roots.front();

  for (int a = 0; a < n; ++a) {
    if (a == tp.root) continue;
    std::vector<int> ins = i.in_neighbors(role, a);
    // The direct parent is the ancestor every other ancestor reaches.
    int par = -1;
    for (int p : ins) {
      bool deepest = true;
      for (int q : ins)
        if (q != p && !i.has_edge(role, q, p)) {
          deepest = false;
          break;
        }
      if (deepest) {
        if (par != -1)
          throw OpError("element " + std::to_string(i.ids[a]) +
                        " has several incomparable predecessors; the input "
                        "must be a tree");
        par = p;
      }
    }
    if (par == -1)
      throw OpError("element " + std::to_string(i.ids[a]) +
                    " has no deepest predecessor; the input must be a tree");
    tp.parent[a] = par;
    tp.children[par].push_back(a);
  }

  // The closed extent must be exactly the closure of the parent edges:
  // together with the checks above this pins the tree shape.
  if (!role.empty()) {
    Interpretation gen = i;
    gen.edges[role].clear();
    for (int a = 0; a < n; ++a)
      if (tp.parent[a] != -1) gen.add_edge(role, tp.parent[a], a);
    if (canonicalize(transitive_closure(gen, sig)) != canonicalize(i))
      throw OpError("the role extent differs from the transitive closure of "
                    "its direct-successor tree");
  }
  return tp;
}

/// Interpretation induced by elem and everything below it. Names are
/// dropped; external ids are preserved.
Interpretation induced_subtree(const Interpretation& i, const std::string& role,
                               int elem, const std::vector<int>& below) {
  std::vector<int> elems = below;
  elems.push_back(elem);
  std::sort(elems.begin(), elems.end());
  Interpretation sub;
  std::map<int, int> to_sub;
  for (int e : elems) {
    to_sub[e] = sub.add_element(i.ids[e], i.labels[e]);
  }
  if (!role.empty())
    for (int e : elems)
      for (int f : i.out_neighbors(role, e))
        if (to_sub.count(f)) sub.add_edge(role, to_sub[e], to_sub[f]);
  return sub;
}

bool has_boolean_match(const CQ& q, const Interpretation& i) {
  return !find_matches(q, i, {}, 1).empty();
}

/// Splits q into its connected components (unary atoms stick to their
/// variable). Components come out canonicalized, in canonical-key order.
std::vector<CQ> connected_components(const CQ& q) {
  std::vector<std::string> vars = vars_of(q);
  std::map<std::string, int> comp;
  int next = 0;
  for (const auto& v : vars) comp[v] = next++;
  // Union-find over variable indices.
  std::vector<int> up(next);
  for (int k = 0; k < next; ++k) up[k] = k;
  std::function<int(int)> root = [&](int x) {
    while (up[x] != x) x = up[x] = up[up[x]];
    return x;
  };
  for (const auto& a : q.atoms)
    if (a.binary()) up[root(comp[a.x])] = root(comp[a.y]);
  std::map<int, CQ> parts;
  for (const auto& a : q.atoms) {
    CQ& part = parts[root(comp[a.x])];
    part.name = q.name;
    part.atoms.push_back(a);
  }
  std::vector<CQ> out;
  for (auto& [k, part] : parts) {
    part.canonicalize();
    out.push_back(std::move(part));
  }
  std::sort(out.begin(), out.end(), [](const CQ& l, const CQ& r) {
    return cq_key(l) < cq_key(r);
  });
  return out;
}

/// Initial variables of q (no incoming binary atom) whose unary atoms all
/// hold on the given label set.
std::set<std::string> pinned_initials(const CQ& q,
                                      const Interpretation& i, int elem) {
  std::set<std::string> pinned;
  for (const auto& v : graph_info(q).initial_vars) {
    bool ok = true;
    for (const auto& a : q.atoms)
      if (!a.binary() && a.x == v && !i.has_label(elem, a.pred)) {
        ok = false;
        break;
      }
    if (ok) pinned.insert(v);
  }
  return pinned;
}

bool atom_subset(const CQ& small, const CQ& big) {
  return std::includes(big.atoms.begin(), big.atoms.end(),
                       small.atoms.begin(), small.atoms.end());
}

unsigned long long saturating_factorial(size_t k) {
  unsigned long long f = 1;
  const unsigned long long cap = 1ULL << 62;
  for (size_t j = 2; j <= k; ++j) {
    if (f > cap / j) return cap;
    f *= j;
  }
  return f;
}

std::vector<std::set<std::string>> visible_sets(
    const Interpretation& i, const std::set<std::string>& names,
    const std::vector<std::vector<int>>& below) {
  std::vector<std::set<std::string>> vc(i.size());
  for (int a = 0; a < i.size(); ++a)
    for (int b : below[a])
      for (const auto& nm : i.label_set(b))
        if (names.count(nm)) vc[a].insert(nm);
  return vc;
}

}  // namespace

std::vector<ForbiddenTuple> forbidden_assignment(const Interpretation& i,
                                                 const Signature& sig,
                                                 const UCQ& q) {
  validate_union(q);
  const std::string role = single_role_of(i, sig, nullptr, q);
  TreeParts tp = closed_tree_parts(i, sig, role);
  const int n = i.size();

  std::vector<Interpretation> sub(n);
  for (int a = 0; a < n; ++a) sub[a] = induced_subtree(i, role, a, tp.below[a]);

  std::vector<CQ> disjuncts = q.cqs;
  for (auto& d : disjuncts) d.canonicalize();
  for (const auto& d : disjuncts) {
    auto ms = find_matches(d, i, {}, 1);
    if (!ms.empty())
      throw OpError("the union already matches in the interpretation: "
                    "disjunct " + cq_key(d) + " via " + render_match(ms[0]));
  }

  std::vector<ForbiddenTuple> out(n);
  out[tp.root].qs = disjuncts;

  // Top-down over direct children; the root is first in any such order.
  std::vector<int> order;
  order.push_back(tp.root);
  for (size_t k = 0; k < order.size(); ++k)
    for (int c : tp.children[order[k]]) order.push_back(c);

  for (int a : order) {
    if (tp.children[a].empty()) continue;
    ForbiddenTuple child;
    for (const auto& qa : out[a].qs) {
      std::set<std::string> pinned = pinned_initials(qa, i, a);
      CQ rest;
      rest.name = qa.name;
      for (const auto& at : qa.atoms) {
        if (pinned.count(at.x) || (at.binary() && pinned.count(at.y))) continue;
        rest.atoms.push_back(at);
      }
      rest.canonicalize();
      const CQ* chosen = nullptr;
      std::vector<CQ> comps = connected_components(rest);
      for (const auto& comp : comps) {
        bool matched_below = false;
        for (int c : tp.children[a])
          if (has_boolean_match(comp, sub[c])) {
            matched_below = true;
            break;
          }
        if (!matched_below) {
          chosen = &comp;
          break;
        }
      }
      if (!chosen)
        throw std::logic_error(
            "forbidden_assignment: every component of " + cq_key(qa) +
            " matches below element " + std::to_string(i.ids[a]) +
            ", so the query itself would match in the subtree");
      child.qs.push_back(*chosen);
    }
    for (int c : tp.children[a]) out[c].qs = child.qs;
  }

  // Tuple entries never match inside their own subtree.
  for (int a = 0; a < n; ++a)
    for (const auto& entry : out[a].qs)
      if (has_boolean_match(entry, sub[a]))
        throw std::logic_error("forbidden_assignment: entry " + cq_key(entry) +
                               " matches in the subtree of element " +
                               std::to_string(i.ids[a]));
  // Entries only shrink along edges.
  if (auto it = i.edges.find(role); !role.empty() && it != i.edges.end())
    for (const auto& [u, v] : it->second)
      for (size_t k = 0; k < out[u].qs.size(); ++k)
        if (!atom_subset(out[v].qs[k], out[u].qs[k]))
          throw std::logic_error(
              "forbidden_assignment: entry grows along the edge " +
              std::to_string(i.ids[u]) + " -> " + std::to_string(i.ids[v]));
  return out;
}

std::set<std::string> visible_concepts(const Interpretation& i,
                                       const Signature& sig,
                                       const NormalTBox& tbox, int elem) {
  if (elem < 0 || elem >= i.size())
    throw OpError("element index " + std::to_string(elem) + " out of range");
  std::set<std::string> trans;
  for (const auto& [r, es] : i.edges)
    if (!es.empty() && sig.is_transitive(r)) trans.insert(r);
  if (trans.size() > 1) {
    std::string list;
    for (const auto& r : trans) list += (list.empty() ? "" : ", ") + r;
    throw OpError("expected a single transitive role but found: " + list);
  }
  if (trans.empty()) return {};
  const std::string role = *trans.begin();

  const int n = i.size();
  std::vector<std::vector<int>> below(n);
  for (int a = 0; a < n; ++a) below[a] = i.out_neighbors(role, a);
  for (int a = 0; a < n; ++a)
    for (int b : below[a])
      for (int c : below[b])
        if (!std::binary_search(below[a].begin(), below[a].end(), c))
          throw OpError("the extent of " + role +
                        " is not transitively closed: " +
                        std::to_string(i.ids[a]) + " -> " +
                        std::to_string(i.ids[b]) + " -> " +
                        std::to_string(i.ids[c]) + " lacks the closing edge");

  auto vc = visible_sets(i, concept_names_of(tbox), below);
  for (const auto& [u, v] : i.edges.at(role))
    if (!std::includes(vc[u].begin(), vc[u].end(), vc[v].begin(), vc[v].end()))
      throw std::logic_error("visible_concepts: the visible set grows along "
                             "the edge " + std::to_string(i.ids[u]) + " -> " +
                             std::to_string(i.ids[v]));
  return vc[elem];
}

ShrunkModel shrink_transitive_tree(const Interpretation& i,
                                   const Signature& sig,
                                   const NormalTBox& tbox, const UCQ& q) {
  validate_union(q);
  const std::string role = single_role_of(i, sig, &tbox, q);
  TreeParts tp = closed_tree_parts(i, sig, role);
  const int n = i.size();

  ModelReport mr = check_model(i, tbox, sig);
  if (!mr.ok())
    throw OpError("the input interpretation does not satisfy the inclusion "
                  "set: " + mr.violations.front().detail);
  std::vector<CQ> disjuncts = q.cqs;
  for (auto& d : disjuncts) d.canonicalize();
  for (const auto& d : disjuncts) {
    auto ms = find_matches(d, i, {}, 1);
    if (!ms.empty())
      throw OpError("the input interpretation satisfies the union: disjunct " +
                    cq_key(d) + " via " + render_match(ms[0]));
  }

  // Establishes the per-element forbidden tuples and their invariants; the
  // finite construction below only consumes the visible-concept sets, but
  // the assignment must exist for the output to avoid the union.
  forbidden_assignment(i, sig, q);

  const std::set<std::string> names = concept_names_of(tbox);
  std::vector<std::set<std::string>> vc = visible_sets(i, names, tp.below);

  struct Piece {
    std::set<int> elems;
    std::set<std::pair<int, int>> edges;
  };
  std::map<int, Piece> memo;
  std::function<const Piece&(int)> build = [&](int a) -> const Piece& {
    auto hit = memo.find(a);
    if (hit != memo.end()) return hit->second;
    Piece p;
    p.elems.insert(a);
    const std::set<std::string>& m = vc[a];
    if (!m.empty()) {
      // Elements at or below a whose visible set is still all of m.
      std::vector<int> alpha;
      alpha.push_back(a);
      for (int b : tp.below[a])
        if (vc[b] == m) alpha.push_back(b);
      // A deepest one: nothing of alpha strictly below it. Finite trees
      // always have one; take the least element id.
      int deepest = -1;
      for (int b : alpha) {
        bool ok = true;
        for (int c : tp.below[b])
          if (vc[c] == m) {
            ok = false;
            break;
          }
        if (ok && (deepest == -1 || i.ids[b] < i.ids[deepest])) deepest = b;
      }
      if (deepest == -1)
        throw std::logic_error("shrink_transitive_tree: no deepest element "
                               "with the full visible set below element " +
                               std::to_string(i.ids[a]));
      // One witness per visible name, first in element-id order below the
      // deepest element; each sees strictly less, so the recursion shrinks.
      std::set<int> wits;
      for (const auto& nm : m) {
        int best = -1;
        for (int c : tp.below[deepest])
          if (i.has_label(c, nm) && (best == -1 || i.ids[c] < i.ids[best]))
            best = c;
        if (best == -1)
          throw std::logic_error("shrink_transitive_tree: visible name " + nm +
                                 " has no witness below element " +
                                 std::to_string(i.ids[deepest]));
        if (vc[best] == m)
          throw std::logic_error("shrink_transitive_tree: witness " +
                                 std::to_string(i.ids[best]) +
                                 " still sees the full set");
        wits.insert(best);
      }
      for (int c : wits) {
        const Piece& pc = build(c);
        p.elems.insert(pc.elems.begin(), pc.elems.end());
        p.edges.insert(pc.edges.begin(), pc.edges.end());
        p.edges.insert({a, c});
      }
    }
    return memo.emplace(a, std::move(p)).first->second;
  };
  const Piece& top = build(tp.root);

  ShrunkModel out;
  out.kept.assign(top.elems.begin(), top.elems.end());
  std::map<int, int> to_new;
  for (int e : out.kept)
    to_new[e] = out.interp.add_element(i.ids[e], i.labels[e]);
  for (const auto& [u, v] : top.edges)
    out.interp.add_edge(role, to_new[u], to_new[v]);
  for (const auto& [nm, e] : i.named)
    if (to_new.count(e)) out.interp.named[nm] = to_new[e];
  out.interp = transitive_closure(out.interp, sig);
  out.root = to_new.at(tp.root);

  // 1. A subset of the input's elements with identical labels (and, being a
  //    sub-collection of closed-tree edges, only edges the input also has).
  for (size_t k = 0; k < out.kept.size(); ++k) {
    if (out.interp.ids[k] != i.ids[out.kept[k]] ||
        out.interp.labels[k] != i.labels[out.kept[k]])
      throw std::logic_error("shrink_transitive_tree: element " +
                             std::to_string(i.ids[out.kept[k]]) +
                             " changed id or labels");
  }
  if (auto it = out.interp.edges.find(role);
      !role.empty() && it != out.interp.edges.end())
    for (const auto& [u, v] : it->second)
      if (!i.has_edge(role, out.kept[u], out.kept[v]))
        throw std::logic_error("shrink_transitive_tree: invented edge " +
                               std::to_string(out.interp.ids[u]) + " -> " +
                               std::to_string(out.interp.ids[v]));
  // 2. Factorial size bound, via the root's visible set and the name count.
  unsigned long long bound =
      saturating_factorial(std::min(vc[tp.root].size(), names.size()) + 1);
  if (out.kept.size() > bound)
    throw std::logic_error("shrink_transitive_tree: kept " +
                           std::to_string(out.kept.size()) +
                           " elements, above the bound " +
                           std::to_string(bound));
  // 3. The root survives.
  if (out.root < 0 || out.interp.ids[out.root] != i.ids[tp.root])
    throw std::logic_error("shrink_transitive_tree: lost the root");
  // 4. The output satisfies the inclusion set.
  ModelReport jr = check_model(out.interp, tbox, sig);
  if (!jr.ok())
    throw std::logic_error("shrink_transitive_tree: output violates the "
                           "inclusion set: " + jr.violations.front().detail);
  // 5. The output still avoids the union.
  for (const auto& d : disjuncts) {
    auto ms = find_matches(d, out.interp, {}, 1);
    if (!ms.empty())
      throw std::logic_error("shrink_transitive_tree: output matches "
                             "disjunct " + cq_key(d) + " via " +
                             render_match(ms[0]));
  }
  return out;
}

}  // namespace sqel
