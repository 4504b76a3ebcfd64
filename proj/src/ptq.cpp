#include "sqel/ptq.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "sqel/interp.hpp"
#include "sqel/util.hpp"

namespace sqel {

namespace {

std::vector<std::string> shared_vars(const Cluster& a, const Cluster& b) {
  std::vector<std::string> out;
  std::set_intersection(a.vars.begin(), a.vars.end(), b.vars.begin(),
                        b.vars.end(), std::back_inserter(out));
  return out;
}

bool cluster_acyclic(const Cluster& c) {
  CQ probe;
  probe.atoms = c.atoms;
  return graph_info(probe).acyclic;
}

/// One variable may not collect incoming atoms over two distinct roles in a
/// query matched into trees.
bool unique_in_role(const CQ& q) {
  std::map<std::string, std::string> in_role;
  for (const auto& a : q.atoms) {
    if (!a.binary()) continue;
    auto [it, fresh] = in_role.emplace(a.y, a.pred);
    if (!fresh && it->second != a.pred) return false;
  }
  return true;
}

/// The descent relation between clusters: a cluster flows into those that
/// must be matched strictly below it. Witnessed by a shared variable that is
/// initial in the target and, when the source is non-transitive, not initial
/// in the source.
bool leads_to(const Cluster& a, const Cluster& b) {
  std::vector<std::string> ia = cluster_initial_vars(a);
  std::vector<std::string> ib = cluster_initial_vars(b);
  for (const auto& v : shared_vars(a, b)) {
    if (!contains_sorted(ib, v)) continue;
    if (a.transitive || !contains_sorted(ia, v)) return true;
  }
  return false;
}

bool digraph_acyclic(const std::vector<std::vector<size_t>>& out) {
  size_t n = out.size();
  std::vector<int> color(n, 0);
  for (size_t s = 0; s < n; ++s) {
    if (color[s]) continue;
    std::vector<std::pair<size_t, size_t>> stack{{s, 0}};
    color[s] = 1;
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      if (k < out[v].size()) {
        size_t w = out[v][k++];
        if (color[w] == 1) return false;
        if (color[w] == 0) {
          color[w] = 1;
          stack.push_back({w, 0});
        }
      } else {
        color[v] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

/// The three conditions under which a fork-eliminated query matches into a
/// transitive-tree interpretation: acyclic, at most one incoming role per
/// variable, and an acyclic descent relation between clusters.
bool matchable_quotient(const CQ& quot, const Signature& sig) {
  if (!graph_info(quot).acyclic) return false;
  if (!unique_in_role(quot)) return false;
  std::vector<Cluster> cs = clusters(quot, sig);
  std::vector<std::vector<size_t>> flow(cs.size());
  for (size_t i = 0; i < cs.size(); ++i)
    for (size_t j = 0; j < cs.size(); ++j)
      if (i != j && leads_to(cs[i], cs[j])) flow[i].push_back(j);
  return digraph_acyclic(flow);
}

/// The single cluster of q that contains variable x, when x lies in exactly
/// one cluster; otherwise absent.
std::optional<Cluster> unique_cluster_of(const std::vector<Cluster>& cs,
                                         const std::string& x) {
  std::optional<Cluster> found;
  for (const auto& c : cs) {
    if (!contains_sorted(c.vars, x)) continue;
    if (found) return std::nullopt;
    found = c;
  }
  return found;
}

}  // namespace

std::vector<size_t> ClusterTree::subtree(size_t i) const {
  std::vector<size_t> out{i};
  for (size_t h = 0; h < out.size(); ++h)
    for (size_t c : children[out[h]]) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<ClusterTree> cluster_tree_for(const CQ& q, const Signature& sig,
                                            const Cluster& root_cluster) {
  std::vector<Cluster> cs = clusters(q, sig);
  size_t n = cs.size();
  size_t root = n;
  for (size_t i = 0; i < n; ++i)
    if (cs[i] == root_cluster) {
      root = i;
      break;
    }
  if (root == n) throw OpError("root cluster is not a cluster of the query");

  std::vector<std::vector<std::vector<std::string>>> shared(
      n, std::vector<std::vector<std::string>>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      shared[i][j] = shared[j][i] = shared_vars(cs[i], cs[j]);

  ClusterTree t;
  t.clusters = cs;
  t.root = root;
  t.parent.assign(n, -1);
  t.children.resize(n);
  t.entry.assign(n, "");

  // The tree is forced level by level: every unplaced cluster sharing a
  // variable with the frontier cluster becomes its child.
  std::vector<char> placed(n, 0);
  std::vector<size_t> bfs{root};
  placed[root] = 1;
  for (size_t h = 0; h < bfs.size(); ++h) {
    size_t c = bfs[h];
    for (size_t j = 0; j < n; ++j) {
      if (placed[j] || shared[c][j].empty()) continue;
      placed[j] = 1;
      t.parent[j] = static_cast<int>(c);
      t.children[c].push_back(j);
      bfs.push_back(j);
    }
  }
  if (bfs.size() != n) return std::nullopt;  // cluster graph not connected

  // (a) sharing only between siblings or parent and child
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      if (shared[i][j].empty()) continue;
      bool related = t.parent[i] == static_cast<int>(j) ||
                     t.parent[j] == static_cast<int>(i) ||
                     t.parent[i] == t.parent[j];
      if (!related) return std::nullopt;
      // (b) siblings share only variables of the common parent
      if (t.parent[i] == t.parent[j]) {
        const auto& pv = cs[static_cast<size_t>(t.parent[i])].vars;
        for (const auto& v : shared[i][j])
          if (!contains_sorted(pv, v)) return std::nullopt;
      }
    }

  // (c) one shared variable with the parent, initial in the child
  for (size_t j = 0; j < n; ++j) {
    if (j == root) continue;
    const auto& sh = shared[j][static_cast<size_t>(t.parent[j])];
    if (sh.size() != 1) return std::nullopt;
    if (!contains_sorted(cluster_initial_vars(cs[j]), sh[0]))
      return std::nullopt;
    t.entry[j] = sh[0];
  }
  return t;
}

std::vector<Cluster> root_clusters(const CQ& q, const Signature& sig) {
  std::vector<Cluster> out;
  for (const auto& c : clusters(q, sig))
    if (cluster_tree_for(q, sig, c)) out.push_back(c);
  return out;
}

bool is_boolean_ptq(const CQ& q0, const Signature& sig) {
  CQ q = q0;
  q.answer_vars.clear();
  q.canonicalize();
  if (!graph_info(q).connected) return false;
  std::vector<Cluster> cs = clusters(q, sig);
  if (cs.empty()) return vars_of(q).size() <= 1;
  for (const auto& c : cs)
    if (c.transitive && !cluster_acyclic(c)) return false;
  return !root_clusters(q, sig).empty();
}

bool is_unary_ptq(const CQ& q, const Signature& sig) {
  if (q.answer_vars.size() != 1) return false;
  const std::string& x = q.answer_vars[0];
  if (!is_boolean_ptq(q, sig)) return false;
  for (const auto& a : q.atoms)
    if (a.binary() && a.y == x) return false;  // x must be initial
  std::vector<Cluster> cs = clusters(q, sig);
  if (cs.empty()) return true;  // no binary atoms: trivially a PTQ
  std::optional<Cluster> home = unique_cluster_of(cs, x);
  if (!home) return false;
  return cluster_tree_for(q, sig, *home).has_value();
}

std::optional<PTQ> compile_boolean_ptq(const CQ& q, const Signature& sig) {
  if (!q.answer_vars.empty())
    throw OpError("Boolean compilation requires a Boolean query");
  if (!graph_info(q).connected)
    throw OpError("compilation requires a connected query");
  ForkResult fr = fork_eliminate(q, sig);
  if (!matchable_quotient(fr.quotient, sig)) return std::nullopt;

  std::vector<Cluster> cs = clusters(fr.quotient, sig);
  if (cs.empty()) return PTQ{fr.quotient, std::nullopt};
  std::vector<Cluster> roots = root_clusters(fr.quotient, sig);
  // Beyond one transitive role the descent checks above do not guarantee a
  // cluster tree; report failure rather than emit a non-PTQ.
  if (roots.empty()) return std::nullopt;
  return PTQ{fr.quotient, cluster_tree_for(fr.quotient, sig, roots[0])};
}

std::optional<std::vector<PTQ>> compile_unary_ptqs(const CQ& q,
                                                   const Signature& sig) {
  if (q.answer_vars.size() != 1)
    throw OpError("unary compilation requires exactly one answer variable");
  if (q.atoms.empty()) throw OpError("query has no atoms");
  if (!graph_info(q).connected)
    throw OpError("compilation requires a connected query");

  ForkResult fr = fork_eliminate(q, sig);
  const CQ& quot = fr.quotient;
  const std::string& x = quot.answer_vars[0];
  if (!matchable_quotient(quot, sig)) return std::nullopt;
  for (const auto& a : quot.atoms)
    if (a.binary() && a.y == x)
      return std::nullopt;  // something points into the root

  // Split at the root: one output per connected component of the quotient
  // with x removed; each keeps the atoms over that component plus x.
  std::vector<std::string> rest;
  for (const auto& v : vars_of(quot))
    if (v != x) rest.push_back(v);
  DSU dsu(rest.size());
  auto idx = [&](const std::string& v) {
    return static_cast<size_t>(
        std::lower_bound(rest.begin(), rest.end(), v) - rest.begin());
  };
  for (const auto& a : quot.atoms)
    if (a.binary() && a.x != x && a.y != x) dsu.unite(idx(a.x), idx(a.y));

  std::vector<Atom> x_unary;
  std::map<size_t, std::vector<Atom>> groups;  // component root -> atoms
  for (const auto& a : quot.atoms) {
    if (!a.binary() && a.x == x) {
      x_unary.push_back(a);
      continue;
    }
    const std::string& anchor = a.binary() && a.x == x ? a.y
                                : a.binary()           ? a.x
                                                       : a.x;
    groups[dsu.find(idx(anchor))].push_back(a);
  }

  std::vector<PTQ> out;
  auto finish = [&](std::vector<Atom> atoms) -> bool {
    CQ piece;
    piece.name = quot.name;
    piece.answer_vars = {x};
    piece.atoms = std::move(atoms);
    piece.atoms.insert(piece.atoms.end(), x_unary.begin(), x_unary.end());
    piece.canonicalize();
    if (!is_unary_ptq(piece, sig)) return false;  // fail closed
    std::optional<ClusterTree> tree;
    std::optional<Cluster> home = unique_cluster_of(clusters(piece, sig), x);
    if (home) tree = cluster_tree_for(piece, sig, *home);
    out.push_back(PTQ{std::move(piece), std::move(tree)});
    return true;
  };

  if (groups.empty()) {
    if (!finish({})) return std::nullopt;
    return out;
  }
  for (auto& [comp, atoms] : groups)
    if (!finish(std::move(atoms))) return std::nullopt;
  return out;
}

std::vector<CQ> subptqs(const CQ& q, const Signature& sig) {
  bool unary = q.answer_vars.size() == 1;
  if (!unary && !q.answer_vars.empty())
    throw OpError("subPTQs require a Boolean or unary query");
  if (unary ? !is_unary_ptq(q, sig) : !is_boolean_ptq(q, sig))
    throw OpError("input query is not a PTQ");

  std::vector<Cluster> cs = clusters(q, sig);
  std::vector<Cluster> roots;
  if (unary) {
    if (cs.empty()) return {};
    roots.push_back(*unique_cluster_of(cs, q.answer_vars[0]));
  } else {
    roots = root_clusters(q, sig);
  }

  std::vector<CQ> out;
  std::set<std::string> seen;
  for (const auto& r : roots) {
    std::optional<ClusterTree> t = cluster_tree_for(q, sig, r);
    for (size_t i = 0; i < t->clusters.size(); ++i) {
      if (i == t->root) continue;
      CQ sub;
      sub.name = q.name;
      sub.answer_vars = {t->entry[i]};
      std::set<std::string> vs;
      for (size_t j : t->subtree(i))
        for (const auto& a : t->clusters[j].atoms) {
          sub.atoms.push_back(a);
          vs.insert(a.x);
          vs.insert(a.y);
        }
      for (const auto& a : q.atoms)
        if (!a.binary() && vs.count(a.x)) sub.atoms.push_back(a);
      sub.canonicalize();
      if (seen.insert(cq_key(sub)).second) out.push_back(std::move(sub));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Treeification
// ---------------------------------------------------------------------------

namespace {

/// Canonical serialization of a rooted labeled tree, invariant under sibling
/// order and node renaming.
std::string tree_canon(const Interpretation& i, int node,
                       const std::vector<std::vector<std::pair<std::string, int>>>&
                           kids) {
  std::string s = "{";
  bool first = true;
  for (const auto& l : i.labels[static_cast<size_t>(node)]) {
    if (!first) s += ",";
    s += l;
    first = false;
  }
  s += "}";
  std::vector<std::string> parts;
  for (const auto& [role, child] : kids[static_cast<size_t>(node)])
    parts.push_back(role + ">" + tree_canon(i, child, kids));
  std::sort(parts.begin(), parts.end());
  s += "[";
  for (const auto& p : parts) s += p + ";";
  s += "]";
  return s;
}

}  // namespace

UCQ treeify(const CQ& q, const Signature& sig) {
  if (q.answer_vars.size() != 1)
    throw OpError("treeification requires a unary query");
  const std::string& x = q.answer_vars[0];

  int n = static_cast<int>(vars_of(q).size());
  std::set<std::string> cset = concept_names_of(q);
  std::vector<std::string> concepts(cset.begin(), cset.end());
  std::set<std::string> rset = role_names_of(q);
  std::vector<std::string> roles(rset.begin(), rset.end());

  // The enumeration below is exponential by design; refuse inputs whose
  // candidate space is clearly out of desk scale.
  {
    double total = 0;
    for (int m = 1; m <= n; ++m) {
      double t = 1;
      for (int e = 2; e <= m; ++e) t *= (e - 1) * std::max<size_t>(roles.size(), 1);
      for (int e = 0; e < m; ++e) t *= static_cast<double>(1ULL << concepts.size());
      total += t;
    }
    if (total > 5e6) throw OpError("treeification space too large");
  }

  // Matching keeps the answer variable in play even when no atom mentions
  // it, so the root pin below stays valid for the empty query.
  const CQ& probe = q;

  std::map<std::string, CQ> kept;  // canonical tree form -> tree query
  for (int m = 1; m <= n; ++m) {
    if (m > 1 && roles.empty()) break;
    std::vector<int> parent(static_cast<size_t>(m), 0);
    std::vector<size_t> role_of(static_cast<size_t>(m), 0);
    std::vector<uint32_t> label_mask(static_cast<size_t>(m), 0);
    size_t nroles = roles.empty() ? 1 : roles.size();
    uint32_t label_lim = 1u << concepts.size();
    for (;;) {
      Interpretation tree;
      for (int e = 0; e < m; ++e) {
        std::vector<std::string> ls;
        for (size_t c = 0; c < concepts.size(); ++c)
          if (label_mask[static_cast<size_t>(e)] >> c & 1)
            ls.push_back(concepts[c]);
        tree.add_element(e, std::move(ls));
      }
      std::vector<std::vector<std::pair<std::string, int>>> kids(
          static_cast<size_t>(m));
      for (int e = 1; e < m; ++e) {
        const std::string& r = roles[role_of[static_cast<size_t>(e)]];
        tree.add_edge(r, parent[static_cast<size_t>(e)], e);
        kids[static_cast<size_t>(parent[static_cast<size_t>(e)])]
            .emplace_back(r, e);
      }
      Interpretation closed = transitive_closure(tree, sig);
      if (!find_matches(probe, closed, {{x, 0}}, 1).empty()) {
        std::string canon = tree_canon(tree, 0, kids);
        if (!kept.count(canon)) {
          CQ tq;
          tq.name = q.name;
          tq.answer_vars = {x};
          auto var_of = [&](int e) {
            return e == 0 ? x : x + "_" + std::to_string(e);
          };
          for (int e = 0; e < m; ++e)
            for (const auto& l : tree.labels[static_cast<size_t>(e)])
              tq.atoms.push_back(unary_atom(l, var_of(e)));
          for (int e = 1; e < m; ++e)
            tq.atoms.push_back(
                binary_atom(roles[role_of[static_cast<size_t>(e)]],
                            var_of(parent[static_cast<size_t>(e)]), var_of(e)));
          tq.canonicalize();
          kept.emplace(std::move(canon), std::move(tq));
        }
      }
      // next configuration: labels, then roles, then parents
      int k = 0;
      while (k < m) {
        if (++label_mask[static_cast<size_t>(k)] < label_lim) break;
        label_mask[static_cast<size_t>(k)] = 0;
        ++k;
      }
      if (k < m) continue;
      k = 1;
      while (k < m) {
        if (++role_of[static_cast<size_t>(k)] < nroles) break;
        role_of[static_cast<size_t>(k)] = 0;
        if (++parent[static_cast<size_t>(k)] < k) break;
        parent[static_cast<size_t>(k)] = 0;
        ++k;
      }
      if (k >= m) break;
    }
  }

  UCQ out;
  for (auto& [canon, tq] : kept) out.cqs.push_back(std::move(tq));
  return out;
}

}  // namespace sqel
