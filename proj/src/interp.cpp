#include "sqel/interp.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

#include "sqel/util.hpp"

namespace sqel {

int Interpretation::dense_of(long long id) const {
  for (int k = 0; k < size(); ++k)
    if (ids[k] == id) return k;
  return -1;
}

int Interpretation::add_element(long long id, std::vector<std::string> labs) {
  assert(dense_of(id) == -1);
  ids.push_back(id);
  sort_unique(labs);
  labels.push_back(std::move(labs));
  return size() - 1;
}

void Interpretation::add_edge(const std::string& role, int from, int to) {
  auto& v = edges[role];
  std::pair<int, int> e{from, to};
  auto it = std::lower_bound(v.begin(), v.end(), e);
  if (it == v.end() || *it != e) v.insert(it, e);
}

bool Interpretation::has_edge(const std::string& role, int from, int to) const {
  auto it = edges.find(role);
  if (it == edges.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(),
                            std::pair<int, int>{from, to});
}

bool Interpretation::has_label(int elem, const std::string& concept_name) const {
  return contains_sorted(labels[elem], concept_name);
}

void Interpretation::add_label(int elem, const std::string& concept_name) {
  auto& v = labels[elem];
  auto it = std::lower_bound(v.begin(), v.end(), concept_name);
  if (it == v.end() || *it != concept_name) v.insert(it, concept_name);
}

std::vector<int> Interpretation::out_neighbors(const std::string& role,
                                               int from) const {
  std::vector<int> out;
  auto it = edges.find(role);
  if (it == edges.end()) return out;
  const auto& v = it->second;
  auto lo = std::lower_bound(v.begin(), v.end(),
                             std::pair<int, int>{from, INT32_MIN});
  for (; lo != v.end() && lo->first == from; ++lo) out.push_back(lo->second);
  return out;
}

std::vector<int> Interpretation::in_neighbors(const std::string& role,
                                              int to) const {
  std::vector<int> out;
  auto it = edges.find(role);
  if (it == edges.end()) return out;
  for (const auto& [f, t] : it->second)
    if (t == to) out.push_back(f);
  sort_unique(out);
  return out;
}

Interpretation canonicalize(const Interpretation& i) {
  std::vector<int> order(i.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return i.ids[a] < i.ids[b]; });
  std::vector<int> where(i.size());
  for (int k = 0; k < i.size(); ++k) where[order[k]] = k;

  Interpretation out;
  for (int k = 0; k < i.size(); ++k) {
    out.ids.push_back(i.ids[order[k]]);
    auto labs = i.labels[order[k]];
    sort_unique(labs);
    out.labels.push_back(std::move(labs));
  }
  for (const auto& [role, es] : i.edges) {
    auto& v = out.edges[role];
    for (const auto& [f, t] : es) v.emplace_back(where[f], where[t]);
    sort_unique(v);
  }
  for (const auto& [n, d] : i.named) out.named[n] = where[d];
  return out;
}

Interpretation transitive_closure(const Interpretation& i, const Signature& sig) {
  Interpretation out = i;
  for (const auto& role : sig.trans_roles) {
    auto it = out.edges.find(role);
    if (it == out.edges.end()) continue;
    // BFS from each source over the role graph.
    std::vector<std::pair<int, int>> closed;
    for (int s = 0; s < out.size(); ++s) {
      std::vector<char> seen(out.size(), 0);
      std::vector<int> stack = out.out_neighbors(role, s);
      for (int v : stack) seen[v] = 1;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        closed.emplace_back(s, v);
        for (int w : out.out_neighbors(role, v))
          if (!seen[w]) {
            seen[w] = 1;
            stack.push_back(w);
          }
      }
    }
    sort_unique(closed);
    it->second = std::move(closed);
  }
  return out;
}

std::vector<char> eval_concept(const Interpretation& i, const ConceptRef& c) {
  int n = i.size();
  std::vector<char> out(n, 0);
  switch (c->kind) {
    case Concept::Kind::Top:
      std::fill(out.begin(), out.end(), 1);
      break;
    case Concept::Kind::Bot:
      break;
    case Concept::Kind::Name:
      for (int e = 0; e < n; ++e) out[e] = i.has_label(e, c->name);
      break;
    case Concept::Kind::Not: {
      auto k = eval_concept(i, c->kids[0]);
      for (int e = 0; e < n; ++e) out[e] = !k[e];
      break;
    }
    case Concept::Kind::And: {
      std::fill(out.begin(), out.end(), 1);
      for (const auto& kid : c->kids) {
        auto k = eval_concept(i, kid);
        for (int e = 0; e < n; ++e) out[e] = out[e] && k[e];
      }
      break;
    }
    case Concept::Kind::Or: {
      for (const auto& kid : c->kids) {
        auto k = eval_concept(i, kid);
        for (int e = 0; e < n; ++e) out[e] = out[e] || k[e];
      }
      break;
    }
    case Concept::Kind::Some: {
      auto k = eval_concept(i, c->kids[0]);
      for (int e = 0; e < n; ++e)
        for (int w : i.out_neighbors(c->role, e))
          if (k[w]) {
            out[e] = 1;
            break;
          }
      break;
    }
    case Concept::Kind::All: {
      auto k = eval_concept(i, c->kids[0]);
      for (int e = 0; e < n; ++e) {
        out[e] = 1;
        for (int w : i.out_neighbors(c->role, e))
          if (!k[w]) {
            out[e] = 0;
            break;
          }
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model checking
// ---------------------------------------------------------------------------

namespace {

void check_transitivity(const Interpretation& i, const Signature& sig,
                        ModelReport& rep) {
  for (const auto& role : sig.trans_roles) {
    auto it = i.edges.find(role);
    if (it == i.edges.end()) continue;
    for (const auto& [a, b] : it->second)
      for (int c : i.out_neighbors(role, b))
        if (!i.has_edge(role, a, c)) {
          rep.violations.push_back(
              {ModelViolation::Kind::Transitivity,
               role + " misses (" + std::to_string(i.ids[a]) + "," +
                   std::to_string(i.ids[c]) + ")",
               a});
          return;  // one witness per report keeps output stable
        }
  }
}

}  // namespace

ModelReport check_model(const Interpretation& i, const TBox& t,
                        const Signature& sig) {
  ModelReport rep;
  for (size_t k = 0; k < t.cis.size(); ++k) {
    auto l = eval_concept(i, t.cis[k].lhs);
    auto r = eval_concept(i, t.cis[k].rhs);
    for (int e = 0; e < i.size(); ++e)
      if (l[e] && !r[e])
        rep.violations.push_back({ModelViolation::Kind::CI,
                                  "inclusion " + std::to_string(k) +
                                      " fails at element " +
                                      std::to_string(i.ids[e]),
                                  e});
  }
  check_transitivity(i, sig, rep);
  return rep;
}

ModelReport check_model(const Interpretation& i, const NormalTBox& t,
                        const Signature& sig) {
  return check_model(i, to_general(t), sig);
}

ModelReport check_model_abox(const Interpretation& i, const ABox& a) {
  ModelReport rep;
  auto elem = [&](const std::string& ind) -> int {
    auto it = i.named.find(ind);
    if (it == i.named.end()) {
      rep.violations.push_back({ModelViolation::Kind::MissingIndividual,
                                "individual " + ind + " is not named", -1});
      return -1;
    }
    return it->second;
  };
  for (const auto& [c, ind] : a.concept_asserts) {
    int e = elem(ind);
    if (e >= 0 && !i.has_label(e, c))
      rep.violations.push_back({ModelViolation::Kind::ConceptAssert,
                                c + "(" + ind + ") fails", e});
  }
  for (const auto& ra : a.role_asserts) {
    int e = elem(ra[1]), f = elem(ra[2]);
    if (e >= 0 && f >= 0 && !i.has_edge(ra[0], e, f))
      rep.violations.push_back({ModelViolation::Kind::RoleAssert,
                                ra[0] + "(" + ra[1] + "," + ra[2] + ") fails", e});
  }
  return rep;
}

ModelReport check_local(const Interpretation& i, int e, const NormalTBox& t) {
  ModelReport rep;
  auto holds_lhs = [&](const std::vector<std::string>& lhs) {
    for (const auto& a : lhs)
      if (!i.has_label(e, a)) return false;
    return true;
  };
  for (size_t k = 0; k < t.cis.size(); ++k) {
    const NormalCI& ci = t.cis[k];
    if (!holds_lhs(ci.lhs)) continue;
    bool ok = true;
    switch (ci.shape) {
      case NormalCI::Shape::Subsume: {
        ok = false;
        for (const auto& b : ci.rhs)
          if (i.has_label(e, b)) {
            ok = true;
            break;
          }
        break;
      }
      case NormalCI::Shape::Exists: {
        ok = false;
        for (int w : i.out_neighbors(ci.role, e))
          if (i.has_label(w, ci.filler)) {
            ok = true;
            break;
          }
        break;
      }
      case NormalCI::Shape::Forall: {
        for (int w : i.out_neighbors(ci.role, e))
          if (!i.has_label(w, ci.filler)) {
            ok = false;
            break;
          }
        break;
      }
    }
    if (!ok)
      rep.violations.push_back({ModelViolation::Kind::CI,
                                normal_ci_key(ci) + " fails at element " +
                                    std::to_string(i.ids[e]),
                                e});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Query matching
// ---------------------------------------------------------------------------

std::vector<Match> find_matches(const CQ& q, const Interpretation& i,
                                const Match& seed, size_t limit) {
  std::vector<std::string> vars = vars_of(q);
  for (const auto& [v, id] : seed) {
    if (!contains_sorted(vars, v))
      throw OpError("seed binds unknown variable " + v);
    if (i.dense_of(id) < 0)
      throw OpError("seed binds missing element " + std::to_string(id));
  }

  std::vector<Match> results;
  if (limit == 0) return results;

  size_t n = vars.size();
  auto idx = [&](const std::string& v) {
    return static_cast<size_t>(
        std::lower_bound(vars.begin(), vars.end(), v) - vars.begin());
  };

  // Elements in id order, so enumeration order is stable under renumbering.
  std::vector<int> elem_order(i.size());
  std::iota(elem_order.begin(), elem_order.end(), 0);
  std::sort(elem_order.begin(), elem_order.end(),
            [&](int a, int b) { return i.ids[a] < i.ids[b]; });

  // Base candidate sets: seed pins first, then unary atoms filter.
  std::vector<std::vector<int>> base(n);
  for (size_t v = 0; v < n; ++v) base[v] = elem_order;
  for (const auto& [v, id] : seed) base[idx(v)] = {i.dense_of(id)};
  for (const auto& a : q.atoms) {
    if (a.binary()) continue;
    auto& cand = base[idx(a.x)];
    std::vector<int> kept;
    for (int e : cand)
      if (i.has_label(e, a.pred)) kept.push_back(e);
    cand = std::move(kept);
  }

  std::vector<int> assign(n, -1);

  // Current candidates of an unassigned variable: base filtered through the
  // binary atoms whose other endpoint is already assigned.
  auto candidates = [&](size_t v) {
    std::vector<int> cand = base[v];
    for (const auto& a : q.atoms) {
      if (!a.binary()) continue;
      size_t xi = idx(a.x), yi = idx(a.y);
      if (xi == v && assign[yi] >= 0) {
        std::vector<int> kept;
        for (int e : cand)
          if (i.has_edge(a.pred, e, assign[yi])) kept.push_back(e);
        cand = std::move(kept);
      } else if (yi == v && assign[xi] >= 0) {
        std::vector<int> kept;
        for (int e : cand)
          if (i.has_edge(a.pred, assign[xi], e)) kept.push_back(e);
        cand = std::move(kept);
      } else if (xi == v && yi == v) {
        std::vector<int> kept;
        for (int e : cand)
          if (i.has_edge(a.pred, e, e)) kept.push_back(e);
        cand = std::move(kept);
      }
    }
    return cand;
  };

  std::function<void(size_t)> rec = [&](size_t depth) {
    if (results.size() >= limit) return;
    if (depth == n) {
      Match m;
      for (size_t v = 0; v < n; ++v) m[vars[v]] = i.ids[assign[v]];
      results.push_back(std::move(m));
      return;
    }
    // Most constrained first; ties by variable name (vars are sorted).
    size_t best = n;
    std::vector<int> best_cand;
    for (size_t v = 0; v < n; ++v) {
      if (assign[v] >= 0) continue;
      auto cand = candidates(v);
      if (best == n || cand.size() < best_cand.size()) {
        best = v;
        best_cand = std::move(cand);
      }
    }
    for (int e : best_cand) {
      assign[best] = e;
      rec(depth + 1);
      assign[best] = -1;
      if (results.size() >= limit) return;
    }
  };
  rec(0);
  return results;
}

bool entails_on(const Interpretation& i, const UCQ& ucq,
                const std::vector<long long>& answers) {
  for (const auto& q : ucq.cqs) {
    if (q.answer_vars.size() != answers.size())
      throw OpError("answer tuple arity mismatch");
    Match seed;
    for (size_t k = 0; k < answers.size(); ++k) seed[q.answer_vars[k]] = answers[k];
    if (!find_matches(q, i, seed, 1).empty()) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Shape classification
// ---------------------------------------------------------------------------

namespace {

struct EdgeList {
  // (from, to, role) over dense indices, sorted
  std::vector<std::tuple<int, int, std::string>> all;
};

EdgeList collect_edges(const Interpretation& i) {
  EdgeList el;
  for (const auto& [role, es] : i.edges)
    for (const auto& [f, t] : es) el.all.emplace_back(f, t, role);
  std::sort(el.all.begin(), el.all.end());
  return el;
}

// Checks the directed-tree shape: one root, every other node exactly one
// incoming edge, no parallel edges, connected, acyclic.
bool is_tree_graph(const Interpretation& i, const EdgeList& el, int& root,
                   std::string& reason) {
  int n = i.size();
  if (n == 0) {
    reason = "empty domain";
    return false;
  }
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> out(n);
  for (size_t k = 0; k < el.all.size(); ++k) {
    auto [f, t, role] = el.all[k];
    if (k > 0) {
      auto [pf, pt, prole] = el.all[k - 1];
      if (pf == f && pt == t) {
        reason = "parallel edges between " + std::to_string(i.ids[f]) +
                 " and " + std::to_string(i.ids[t]);
        return false;
      }
    }
    indeg[t]++;
    out[f].push_back(t);
  }
  root = -1;
  for (int v = 0; v < n; ++v) {
    if (indeg[v] == 0) {
      if (root != -1) {
        reason = "two roots";
        return false;
      }
      root = v;
    } else if (indeg[v] != 1) {
      reason = "element " + std::to_string(i.ids[v]) + " has in-degree " +
               std::to_string(indeg[v]);
      return false;
    }
  }
  if (root == -1) {
    reason = "no root";
    return false;
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{root};
  seen[root] = 1;
  int cnt = 0;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    cnt++;
    for (int w : out[v]) {
      if (seen[w]) {
        reason = "revisit during traversal";
        return false;
      }
      seen[w] = 1;
      stack.push_back(w);
    }
  }
  if (cnt != n) {
    reason = "not connected";
    return false;
  }
  return true;
}

// Per-role transitive reduction targeting elements outside keep_all (the
// named core): edge (a,b) survives iff there is no intermediate c with
// (a,c),(c,b). Only valid on acyclic extents.
bool reduce_role(const Interpretation& i, const std::string& role,
                 const std::set<int>& core,
                 std::vector<std::pair<int, int>>& reduced,
                 std::string& reason) {
  auto it = i.edges.find(role);
  if (it == i.edges.end()) return true;
  // Acyclicity of the part feeding non-core targets matters; cycles through
  // core elements are allowed and those edges are kept verbatim.
  for (const auto& [a, b] : it->second) {
    if (core.count(a) && core.count(b)) {
      reduced.emplace_back(a, b);
      continue;
    }
    if (a == b) {
      reason = "self-loop at " + std::to_string(i.ids[a]);
      return false;
    }
    bool redundant = false;
    for (int c : i.out_neighbors(role, a)) {
      if (c != a && c != b && i.has_edge(role, c, b)) {
        redundant = true;
        break;
      }
    }
    if (!redundant) reduced.emplace_back(a, b);
  }
  return true;
}

}  // namespace

std::optional<Interpretation> theta_forest_generator(const Interpretation& i,
                                                     const Signature& sig,
                                                     std::string& reason) {
  std::set<int> core;
  for (const auto& [nm, d] : i.named) core.insert(d);
  int n = i.size();
  EdgeList el = collect_edges(i);

  // No edge may enter the core from outside it.
  for (const auto& [f, t, role] : el.all) {
    (void)role;
    if (core.count(t) && !core.count(f)) {
      reason = "edge into named element " + std::to_string(i.ids[t]) +
               " from an anonymous element";
      return std::nullopt;
    }
  }

  std::vector<int> parent(n, -1);
  Interpretation cand = i;
  for (auto& [role, es] : cand.edges) {
    std::vector<std::pair<int, int>> kept;
    for (const auto& [f, t] : es)
      if (core.count(f) && core.count(t)) kept.emplace_back(f, t);
    es = std::move(kept);
  }
  for (int y = 0; y < n; ++y) {
    if (core.count(y)) continue;
    std::string in_role;
    for (const auto& [role, es] : i.edges)
      for (const auto& [f, t] : es)
        if (t == y && !in_role.empty() && role != in_role) {
          reason = "element " + std::to_string(i.ids[y]) +
                   " has incoming edges over two roles";
          return std::nullopt;
        } else if (t == y) {
          in_role = role;
        }
    if (in_role.empty()) {
      reason = "element " + std::to_string(i.ids[y]) + " has no parent";
      return std::nullopt;
    }
    std::vector<int> cands = i.in_neighbors(in_role, y);
    int chosen = -1;
    if (!sig.is_transitive(in_role)) {
      if (cands.size() != 1) {
        reason = "element " + std::to_string(i.ids[y]) +
                 " has several plain-role parents";
        return std::nullopt;
      }
      chosen = cands[0];
    } else {
      // The parent must be a candidate every other candidate reaches
      // directly; with ties (core cycles) the least index works.
      for (int x : cands) {
        bool minimal = true;
        for (int z : cands)
          if (z != x && !i.has_edge(in_role, z, x)) {
            minimal = false;
            break;
          }
        if (minimal) {
          chosen = x;
          break;
        }
      }
      if (chosen == -1) {
        reason = "element " + std::to_string(i.ids[y]) +
                 " has incomparable ancestors";
        return std::nullopt;
      }
    }
    parent[y] = chosen;
    cand.add_edge(in_role, chosen, y);
  }

  // Parent chains must reach the core without cycles.
  for (int v = 0; v < n; ++v) {
    if (core.count(v)) continue;
    int steps = 0, w = v;
    while (w != -1 && !core.count(w) && steps <= n) {
      w = parent[w];
      steps++;
    }
    if (w == -1 || steps > n) {
      reason = "element " + std::to_string(i.ids[v]) +
               " is not attached to a named root";
      return std::nullopt;
    }
  }

  if (!(canonicalize(transitive_closure(cand, sig)) == canonicalize(i))) {
    reason = "closure of the selected forest differs";
    return std::nullopt;
  }
  return cand;
}

ShapeReport classify_shape(const Interpretation& i, const Signature& sig) {
  ShapeReport rep;
  EdgeList el = collect_edges(i);

  {
    int root = -1;
    std::string reason;
    if (is_tree_graph(i, el, root, reason)) {
      rep.shape = ShapeClass::Tree;
      rep.root = root;
      return rep;
    }
    rep.reason = "tree: " + reason;
  }

  // Transitive tree: reduce the transitive roles (no core), require the
  // reduction to be a tree whose closure gives back i.
  {
    Interpretation cand = i;
    bool ok = true;
    std::string reason;
    for (const auto& role : sig.trans_roles) {
      std::vector<std::pair<int, int>> red;
      if (!reduce_role(i, role, {}, red, reason)) {
        ok = false;
        break;
      }
      if (i.edges.count(role)) cand.edges[role] = red;
    }
    if (ok) {
      int root = -1;
      EdgeList cel = collect_edges(cand);
      if (is_tree_graph(cand, cel, root, reason) &&
          canonicalize(transitive_closure(cand, sig)) == canonicalize(i)) {
        rep.shape = ShapeClass::TransitiveTree;
        rep.root = root;
        rep.underlying = cand;
        return rep;
      }
    }
    rep.reason += "; transitive-tree: " + reason;
  }

  // Theta-forest with theta = the named elements. Core edges (between named
  // elements) are unrestricted; every anonymous element needs a unique
  // parent edge such that the closure of core plus parent edges is i.
  {
    std::string reason;
    if (auto gen = theta_forest_generator(i, sig, reason)) {
      rep.shape = ShapeClass::ThetaForest;
      for (const auto& [nm, d] : i.named) rep.theta.insert(nm);
      rep.underlying = std::move(*gen);
      return rep;
    }
    rep.reason += "; theta-forest: " + reason;
  }

  rep.shape = ShapeClass::Other;
  return rep;
}

// ---------------------------------------------------------------------------
// Unraveling
// ---------------------------------------------------------------------------

Unraveling unravel(const Interpretation& i, int root, int depth_cap) {
  if (root < 0 || root >= i.size()) throw OpError("unravel: bad root");
  Unraveling u;
  std::vector<int> depth;

  u.interp.add_element(0, i.labels[root]);
  u.base.push_back(root);
  u.parent.push_back(-1);
  u.parent_role.push_back("");
  depth.push_back(0);

  for (int node = 0; node < u.interp.size(); ++node) {
    if (depth[node] >= depth_cap) continue;
    int x = u.base[node];
    for (const auto& [role, es] : i.edges) {
      for (int y : i.out_neighbors(role, x)) {
        int child = u.interp.add_element(u.interp.size(), i.labels[y]);
        u.interp.add_edge(role, node, child);
        u.base.push_back(y);
        u.parent.push_back(node);
        u.parent_role.push_back(role);
        depth.push_back(depth[node] + 1);
      }
    }
  }
  return u;
}

}  // namespace sqel
