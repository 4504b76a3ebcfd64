#include "sqel/query.hpp"

#include <algorithm>
#include <functional>

#include "sqel/util.hpp"

namespace sqel {

void CQ::canonicalize() {
  sort_unique(atoms);
}

std::vector<std::string> vars_of(const CQ& q) {
  std::vector<std::string> v(q.answer_vars.begin(), q.answer_vars.end());
  for (const auto& a : q.atoms) {
    v.push_back(a.x);
    if (a.binary()) v.push_back(a.y);
  }
  sort_unique(v);
  return v;
}

std::set<std::string> concept_names_of(const CQ& q) {
  std::set<std::string> out;
  for (const auto& a : q.atoms)
    if (!a.binary()) out.insert(a.pred);
  return out;
}

std::set<std::string> role_names_of(const CQ& q) {
  std::set<std::string> out;
  for (const auto& a : q.atoms)
    if (a.binary()) out.insert(a.pred);
  return out;
}

std::string atom_key(const Atom& a) {
  return a.binary() ? a.pred + "(" + a.x + "," + a.y + ")"
                    : a.pred + "(" + a.x + ")";
}

std::string cq_key(const CQ& q) {
  CQ c = q;
  c.canonicalize();
  std::string s = "(";
  for (size_t i = 0; i < c.answer_vars.size(); ++i)
    s += (i ? "," : "") + c.answer_vars[i];
  s += "):";
  for (const auto& a : c.atoms) s += " " + atom_key(a);
  return s;
}

CQ rename_vars(const CQ& q, const std::map<std::string, std::string>& sub) {
  auto m = [&](const std::string& v) {
    auto it = sub.find(v);
    return it == sub.end() ? v : it->second;
  };
  CQ out;
  out.name = q.name;
  for (const auto& v : q.answer_vars) out.answer_vars.push_back(m(v));
  for (const auto& a : q.atoms)
    out.atoms.push_back(a.binary() ? binary_atom(a.pred, m(a.x), m(a.y))
                                   : unary_atom(a.pred, m(a.x)));
  out.canonicalize();
  return out;
}

CQ restrict_vars(const CQ& q, const std::set<std::string>& keep) {
  CQ out;
  out.name = q.name;
  for (const auto& v : q.answer_vars)
    if (keep.count(v)) out.answer_vars.push_back(v);
  for (const auto& a : q.atoms) {
    bool ok = keep.count(a.x) && (!a.binary() || keep.count(a.y));
    if (ok) out.atoms.push_back(a);
  }
  out.canonicalize();
  return out;
}

// ---------------------------------------------------------------------------
// Graph predicates
// ---------------------------------------------------------------------------

QueryGraphInfo graph_info(const CQ& q) {
  QueryGraphInfo info;
  std::vector<std::string> vars = vars_of(q);
  auto idx = [&](const std::string& v) {
    return static_cast<size_t>(
        std::lower_bound(vars.begin(), vars.end(), v) - vars.begin());
  };
  size_t n = vars.size();
  std::vector<std::vector<size_t>> out(n), und(n);
  std::vector<int> indeg(n, 0);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& a : q.atoms) {
    if (!a.binary()) continue;
    size_t u = idx(a.x), v = idx(a.y);
    out[u].push_back(v);
    und[u].push_back(v);
    und[v].push_back(u);
    indeg[v]++;
    pairs.emplace_back(a.x, a.y);
  }
  std::sort(pairs.begin(), pairs.end());
  info.has_parallel_edges =
      std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end();

  // Cycle detection via iterative coloring.
  std::vector<int> color(n, 0);
  for (size_t s = 0; s < n && info.acyclic; ++s) {
    if (color[s]) continue;
    std::vector<std::pair<size_t, size_t>> stack{{s, 0}};
    color[s] = 1;
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      if (k < out[v].size()) {
        size_t w = out[v][k++];
        if (color[w] == 1) {
          info.acyclic = false;
          break;
        }
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

  if (n > 0) {
    std::vector<char> seen(n, 0);
    std::vector<size_t> bfs{0};
    seen[0] = 1;
    for (size_t i = 0; i < bfs.size(); ++i)
      for (size_t w : und[bfs[i]])
        if (!seen[w]) {
          seen[w] = 1;
          bfs.push_back(w);
        }
    info.connected =
        std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  }
  info.rooted = info.connected && !q.answer_vars.empty();
  for (size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) info.initial_vars.push_back(vars[v]);
  return info;
}

bool is_tree_query(const CQ& q, const std::string& root_var) {
  std::vector<std::string> vars = vars_of(q);
  if (!contains_sorted(vars, root_var)) return false;
  std::map<std::string, int> indeg;
  for (const auto& v : vars) indeg[v] = 0;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& a : q.atoms) {
    if (!a.binary()) continue;
    indeg[a.y]++;
    pairs.emplace_back(a.x, a.y);
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end())
    return false;
  for (const auto& v : vars) {
    int want = v == root_var ? 0 : 1;
    if (indeg[v] != want) return false;
  }
  QueryGraphInfo info = graph_info(q);
  return info.acyclic && info.connected;
}

// ---------------------------------------------------------------------------
// Clusters
// ---------------------------------------------------------------------------

std::vector<Cluster> clusters(const CQ& q, const Signature& sig) {
  std::vector<Atom> bin;
  for (const auto& a : q.atoms)
    if (a.binary()) bin.push_back(a);
  sort_unique(bin);

  std::vector<Cluster> out;

  // Non-transitive: group by (role, source).
  std::map<std::pair<std::string, std::string>, std::vector<Atom>> stars;
  // Transitive: connected components per role over shared variables.
  std::map<std::string, std::vector<Atom>> trans_atoms;

  for (const auto& a : bin) {
    if (sig.is_transitive(a.pred))
      trans_atoms[a.pred].push_back(a);
    else
      stars[{a.pred, a.x}].push_back(a);
  }
  for (auto& [key, atoms] : stars) {
    Cluster c;
    c.role = key.first;
    c.transitive = false;
    c.atoms = std::move(atoms);
    for (const auto& a : c.atoms) {
      c.vars.push_back(a.x);
      c.vars.push_back(a.y);
    }
    sort_unique(c.vars);
    out.push_back(std::move(c));
  }
  for (auto& [role, atoms] : trans_atoms) {
    DSU dsu(atoms.size());
    std::map<std::string, std::vector<size_t>> by_var;
    for (size_t i = 0; i < atoms.size(); ++i) {
      by_var[atoms[i].x].push_back(i);
      by_var[atoms[i].y].push_back(i);
    }
    for (const auto& [v, ids] : by_var)
      for (size_t i = 1; i < ids.size(); ++i) dsu.unite(ids[0], ids[i]);
    std::map<size_t, Cluster> comps;
    for (size_t i = 0; i < atoms.size(); ++i) {
      Cluster& c = comps[dsu.find(i)];
      c.role = role;
      c.transitive = true;
      c.atoms.push_back(atoms[i]);
      c.vars.push_back(atoms[i].x);
      c.vars.push_back(atoms[i].y);
    }
    for (auto& [root, c] : comps) {
      sort_unique(c.atoms);
      sort_unique(c.vars);
      out.push_back(std::move(c));
    }
  }
  std::sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
    if (a.role != b.role) return a.role < b.role;
    return a.atoms < b.atoms;
  });
  return out;
}

std::vector<std::string> cluster_initial_vars(const Cluster& c) {
  std::set<std::string> has_in;
  for (const auto& a : c.atoms) has_in.insert(a.y);
  std::vector<std::string> out;
  for (const auto& v : c.vars)
    if (!has_in.count(v)) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Fork elimination and tree matchability
// ---------------------------------------------------------------------------

namespace {

/// Shared fixpoint driver: repeatedly forms the quotient, asks `step` for
/// variable pairs to identify, and stops when no identification fires.
/// Returns the final representative map.
std::map<std::string, std::string> identify_fixpoint(
    const CQ& q,
    const std::function<std::vector<std::pair<std::string, std::string>>(
        const CQ&, const std::map<std::string, std::string>&)>& step) {
  std::vector<std::string> vars = vars_of(q);
  auto idx = [&](const std::string& v) {
    return static_cast<size_t>(
        std::lower_bound(vars.begin(), vars.end(), v) - vars.begin());
  };
  DSU dsu(vars.size());
  std::string answer = q.answer_vars.empty() ? "" : q.answer_vars[0];

  auto rep_map = [&]() {
    // Least variable represents the class; the answer variable wins its class.
    std::map<size_t, std::string> least;
    for (size_t i = 0; i < vars.size(); ++i) {
      size_t r = dsu.find(i);
      if (!least.count(r)) least[r] = vars[i];  // vars sorted, first is least
    }
    if (!answer.empty()) least[dsu.find(idx(answer))] = answer;
    std::map<std::string, std::string> m;
    for (size_t i = 0; i < vars.size(); ++i) m[vars[i]] = least[dsu.find(i)];
    return m;
  };

  for (;;) {
    auto m = rep_map();
    CQ quot = rename_vars(q, m);
    bool changed = false;
    for (const auto& [a, b] : step(quot, m))
      changed |= dsu.unite(idx(a), idx(b));
    if (!changed) break;
  }
  return rep_map();
}

std::vector<std::pair<std::string, std::string>> same_role_fork_pairs(
    const CQ& q, const Signature& sig) {
  std::vector<std::pair<std::string, std::string>> out;
  for (size_t i = 0; i < q.atoms.size(); ++i) {
    const Atom& a = q.atoms[i];
    if (!a.binary() || sig.is_transitive(a.pred)) continue;
    for (size_t j = i + 1; j < q.atoms.size(); ++j) {
      const Atom& b = q.atoms[j];
      if (b.binary() && b.pred == a.pred && b.y == a.y && b.x != a.x)
        out.emplace_back(a.x, b.x);
    }
  }
  return out;
}

}  // namespace

ForkResult fork_eliminate(const CQ& q0, const Signature& sig, ForkMode mode) {
  if (q0.answer_vars.size() > 1)
    throw OpError("fork elimination requires a unary or Boolean query");
  CQ q = q0;
  q.canonicalize();

  // In FixedClusters mode the transitive clusters are those of the input
  // query, carried through the current representative map.
  std::vector<Cluster> fixed = clusters(q, sig);

  auto step = [&](const CQ& quot, const std::map<std::string, std::string>& rep) {
    std::vector<std::pair<std::string, std::string>> out =
        same_role_fork_pairs(quot, sig);

    std::vector<std::set<std::string>> cluster_vars;
    if (mode == ForkMode::RecomputeClusters) {
      for (const auto& c : clusters(quot, sig))
        if (c.transitive)
          cluster_vars.emplace_back(c.vars.begin(), c.vars.end());
    } else {
      // Carry each original cluster's variable set through the quotient map.
      for (const auto& c : fixed) {
        if (!c.transitive) continue;
        std::set<std::string> vs;
        for (const auto& v : c.vars) vs.insert(rep.at(v));
        cluster_vars.push_back(std::move(vs));
      }
    }
    for (const auto& vs : cluster_vars) {
      // (ddagger): targets of non-transitive atoms inside one transitive
      // cluster's variable set are identified.
      std::vector<std::string> targets;
      for (const auto& a : quot.atoms)
        if (a.binary() && !sig.is_transitive(a.pred) && vs.count(a.y))
          targets.push_back(a.y);
      sort_unique(targets);
      for (size_t i = 1; i < targets.size(); ++i)
        out.emplace_back(targets[0], targets[i]);
    }
    return out;
  };

  ForkResult res;
  res.representative = identify_fixpoint(q, step);
  res.quotient = rename_vars(q, res.representative);
  return res;
}

bool tree_matchable(const CQ& q0, const Signature& sig) {
  CQ q = q0;
  q.canonicalize();
  if (!graph_info(q).connected)
    throw OpError("tree matchability requires a connected query");

  auto step = [&](const CQ& quot, const std::map<std::string, std::string>&) {
    std::vector<std::pair<std::string, std::string>> out =
        same_role_fork_pairs(quot, sig);
    for (const auto& c : clusters(quot, sig)) {
      if (!c.transitive) continue;
      std::vector<std::string> init = cluster_initial_vars(c);
      for (size_t i = 1; i < init.size(); ++i)
        out.emplace_back(init[0], init[i]);
    }
    return out;
  };
  CQ quot = rename_vars(q, identify_fixpoint(q, step));

  QueryGraphInfo info = graph_info(quot);
  if (!info.acyclic) return false;
  // No variable may have incoming atoms over two different roles.
  std::map<std::string, std::set<std::string>> in_roles;
  for (const auto& a : quot.atoms)
    if (a.binary()) in_roles[a.y].insert(a.pred);
  for (const auto& [v, roles] : in_roles)
    if (roles.size() > 1) return false;
  return true;
}

}  // namespace sqel
