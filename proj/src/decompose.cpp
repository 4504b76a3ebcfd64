#include "sqel/decompose.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>

#include "sqel/ptq.hpp"
#include "sqel/textio.hpp"
#include "sqel/util.hpp"

namespace sqel {

namespace {

// ---------------------------------------------------------------------------
// Small query helpers
// ---------------------------------------------------------------------------

// Connected components of q's atoms under undirected variable sharing,
// returned as atom-index groups ordered by their smallest atom index.
std::vector<std::vector<size_t>> atom_components(const CQ& q) {
  std::map<std::string, size_t> vidx;
  for (const auto& a : q.atoms) {
    vidx.emplace(a.x, vidx.size());
    if (a.binary()) vidx.emplace(a.y, vidx.size());
  }
  DSU dsu(vidx.size());
  for (const auto& a : q.atoms)
    if (a.binary()) dsu.unite(vidx.at(a.x), vidx.at(a.y));
  std::map<size_t, std::vector<size_t>> by_root;
  for (size_t i = 0; i < q.atoms.size(); ++i)
    by_root[dsu.find(vidx.at(q.atoms[i].x))].push_back(i);
  std::map<size_t, std::vector<size_t>> by_least;
  for (auto& [root, idxs] : by_root) by_least.emplace(idxs.front(), idxs);
  std::vector<std::vector<size_t>> out;
  for (auto& [least, idxs] : by_least) out.push_back(std::move(idxs));
  return out;
}

CQ component_cq(const CQ& q, const std::vector<size_t>& atom_idx,
                std::vector<std::string> answers) {
  CQ out;
  out.name = q.name;
  out.answer_vars = std::move(answers);
  for (size_t i : atom_idx) out.atoms.push_back(q.atoms[i]);
  out.canonicalize();
  return out;
}

bool mentions_var(const CQ& q, const std::vector<size_t>& atom_idx,
                  const std::string& v) {
  for (size_t i : atom_idx) {
    const Atom& a = q.atoms[i];
    if (a.x == v || (a.binary() && a.y == v)) return true;
  }
  return false;
}

// Every connected component matchable into the closure of some tree; the
// whole query then matches one tree (components combine under a new root).
bool components_tree_matchable(const CQ& q, const Signature& sig) {
  for (const auto& comp : atom_components(q))
    if (!tree_matchable(component_cq(q, comp, {}), sig)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Split slots
// ---------------------------------------------------------------------------

// Slot encoding over theta of size T: slot 2k is U_{theta[k]}, slot 2k+1 is
// V_{theta[k]}. A successor of a root set may sit at any root (the collapsed
// atom becomes a core atom of the hat, and cores may carry any edges between
// roots, self-edges included); a successor of a tree set stays in the same
// tree set.
bool slot_pair_allowed(int sx, int sy) {
  bool ux = sx % 2 == 0, uy = sy % 2 == 0;
  int rx = sx / 2, ry = sy / 2;
  if (!ux) return sy == sx;            // V_a -> V_a only
  return uy || ry == rx;               // U_a -> any U_b, or V_a
}

}  // namespace

// ---------------------------------------------------------------------------
// Subdivisions
// ---------------------------------------------------------------------------

std::vector<Subdivision> subdivisions(const CQ& q, const Signature& sig) {
  CQ base = q;
  base.canonicalize();
  std::vector<size_t> tatoms;
  for (size_t i = 0; i < base.atoms.size(); ++i)
    if (base.atoms[i].binary() && sig.is_transitive(base.atoms[i].pred))
      tatoms.push_back(i);
  if (tatoms.size() > 16) throw OpError("subdivision space too large");

  std::vector<std::string> base_vars = vars_of(base);
  auto midpoint_name = [&](size_t j) {
    std::string cand = "_m" + std::to_string(j);
    while (contains_sorted(base_vars, cand)) cand.insert(cand.begin(), '_');
    return cand;
  };

  std::vector<Subdivision> out;
  for (uint32_t mask = 0; mask < (1u << tatoms.size()); ++mask) {
    Subdivision s;
    s.query.name = base.name;
    s.query.answer_vars = base.answer_vars;
    std::set<size_t> split_idx;
    for (size_t j = 0; j < tatoms.size(); ++j)
      if (mask >> j & 1) split_idx.insert(tatoms[j]);
    for (size_t i = 0; i < base.atoms.size(); ++i) {
      if (!split_idx.count(i)) {
        s.query.atoms.push_back(base.atoms[i]);
        continue;
      }
      size_t j =
          static_cast<size_t>(std::find(tatoms.begin(), tatoms.end(), i) -
                              tatoms.begin());
      std::string mid = midpoint_name(j);
      const Atom& a = base.atoms[i];
      s.query.atoms.push_back(binary_atom(a.pred, a.x, mid));
      s.query.atoms.push_back(binary_atom(a.pred, mid, a.y));
      s.fresh.push_back(mid);
    }
    sort_unique(s.fresh);
    s.query.canonicalize();
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split enumeration
// ---------------------------------------------------------------------------

std::vector<ThetaSplit> enumerate_splits(
    const CQ& p, const std::vector<std::string>& theta) {
  std::vector<std::string> vars = vars_of(p);
  size_t nslots = 2 * theta.size();

  std::map<std::string, size_t> vidx;
  for (size_t i = 0; i < vars.size(); ++i) vidx.emplace(vars[i], i);
  // Binary atom endpoints as variable indices, checked once both are set.
  std::vector<std::pair<size_t, size_t>> arcs;
  for (const auto& a : p.atoms)
    if (a.binary()) arcs.emplace_back(vidx.at(a.x), vidx.at(a.y));
  sort_unique(arcs);

  std::vector<ThetaSplit> out;
  if (vars.empty()) {
    out.push_back(ThetaSplit{
        std::vector<std::vector<std::string>>(theta.size()),
        std::vector<std::vector<std::string>>(theta.size())});
    return out;
  }
  if (nslots == 0) return out;  // variables exist but nowhere to put them

  std::vector<int> slot(vars.size(), -1);
  uint64_t visited = 0;
  const uint64_t kNodeCap = 20'000'000;

  auto emit = [&]() {
    ThetaSplit s;
    s.u.resize(theta.size());
    s.v.resize(theta.size());
    for (size_t i = 0; i < vars.size(); ++i) {
      size_t root = static_cast<size_t>(slot[i]) / 2;
      (slot[i] % 2 == 0 ? s.u : s.v)[root].push_back(vars[i]);
    }
    out.push_back(std::move(s));
  };

  std::function<void(size_t)> rec = [&](size_t k) {
    if (k == vars.size()) {
      emit();
      return;
    }
    for (size_t s = 0; s < nslots; ++s) {
      if (++visited > kNodeCap)
        throw OpError("split enumeration space too large");
      slot[k] = static_cast<int>(s);
      bool ok = true;
      for (const auto& [ix, iy] : arcs) {
        if (std::max(ix, iy) != k || slot[ix] < 0 || slot[iy] < 0) continue;
        if (!slot_pair_allowed(slot[ix], slot[iy])) {
          ok = false;
          break;
        }
      }
      if (ok) rec(k + 1);
      slot[k] = -1;
    }
  };
  rec(0);
  return out;
}

// ---------------------------------------------------------------------------
// Split queries
// ---------------------------------------------------------------------------

SplitQueries split_queries(const CQ& p, const ThetaSplit& sigma,
                           const std::vector<std::string>& theta) {
  SplitQueries sq;
  std::vector<std::string> pvars = vars_of(p);
  std::set<std::string> taken(pvars.begin(), pvars.end());

  sq.root_var.resize(theta.size());
  std::map<std::string, std::string> sub;
  for (size_t k = 0; k < theta.size(); ++k) {
    std::string cand = "x_" + theta[k];
    while (taken.count(cand)) cand += "_";
    taken.insert(cand);
    sq.root_var[k] = cand;
    for (const auto& v : sigma.u[k]) sub[v] = cand;
  }

  sq.q_sigma = rename_vars(p, sub);

  std::set<std::string> xnames(sq.root_var.begin(), sq.root_var.end());
  sq.hat = restrict_vars(sq.q_sigma, xnames);
  sq.hat.answer_vars.clear();
  sq.hat.canonicalize();

  sq.at_root.resize(theta.size());
  for (size_t k = 0; k < theta.size(); ++k) {
    std::set<std::string> keep(sigma.v[k].begin(), sigma.v[k].end());
    keep.insert(sq.root_var[k]);
    CQ qa = restrict_vars(sq.q_sigma, keep);
    // Binary atoms entirely on the root collapse to core self-edges; they
    // belong to the hat and can never hold in a tree, so the per-tree query
    // drops them.
    std::erase_if(qa.atoms, [&](const Atom& a) {
      return a.binary() && a.x == sq.root_var[k] && a.y == sq.root_var[k];
    });
    bool crossing = false;
    std::set<std::string> uk(sigma.u[k].begin(), sigma.u[k].end());
    std::set<std::string> vk(sigma.v[k].begin(), sigma.v[k].end());
    for (const auto& a : p.atoms)
      if (a.binary() && uk.count(a.x) && vk.count(a.y)) crossing = true;
    qa.answer_vars.clear();
    if (!sigma.u[k].empty() && crossing) qa.answer_vars = {sq.root_var[k]};
    qa.canonicalize();
    sq.at_root[k] = std::move(qa);
  }
  return sq;
}

bool is_admissible(const Subdivision& p, const ThetaSplit& sigma,
                   const std::vector<std::string>& theta,
                   const Signature& sig) {
  std::set<std::string> in_u;
  for (const auto& uk : sigma.u) in_u.insert(uk.begin(), uk.end());
  for (const auto& f : p.fresh)
    if (!in_u.count(f)) return false;

  SplitQueries sq = split_queries(p.query, sigma, theta);
  for (const auto& qa : sq.at_root)
    if (!components_tree_matchable(qa, sig)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Forest decomposition
// ---------------------------------------------------------------------------

ForestParts forest_parts(const Interpretation& i, const Signature& sig) {
  if (i.named.empty())
    throw OpError("interpretation has no named individuals to serve as roots");

  std::string reason;
  std::optional<Interpretation> gen_opt = theta_forest_generator(i, sig, reason);
  if (!gen_opt)
    throw OpError("interpretation is not a theta-forest: " + reason);
  // Core edges plus one parent edge per anonymous node.
  Interpretation gen = std::move(*gen_opt);

  ForestParts parts;
  std::set<int> core;
  for (const auto& [name, d] : i.named) {
    parts.theta.push_back(name);
    core.insert(d);
  }
  sort_unique(parts.theta);

  // Core: named elements with their labels and mutual edges from i.
  {
    std::map<int, long long> dense_sorted;  // dense -> external, id order
    for (int d : core) dense_sorted.emplace(d, i.ids[static_cast<size_t>(d)]);
    std::map<int, int> remap;
    for (const auto& [d, id] : dense_sorted)
      remap[d] = parts.core.add_element(
          id, i.labels[static_cast<size_t>(d)]);
    for (const auto& [name, d] : i.named) parts.core.named[name] = remap[d];
    for (const auto& [role, es] : i.edges)
      for (const auto& [f, t] : es)
        if (core.count(f) && core.count(t))
          parts.core.add_edge(role, remap[f], remap[t]);
  }

  // Parent map over the generator's non-core nodes.
  int n = i.size();
  std::vector<int> parent(static_cast<size_t>(n), -1);
  std::vector<std::string> parent_role(static_cast<size_t>(n));
  for (const auto& [role, es] : gen.edges)
    for (const auto& [f, t] : es) {
      if (core.count(t)) continue;
      if (parent[static_cast<size_t>(t)] != -1)
        throw std::logic_error(
            "forest generator gave an element two parent edges");
      parent[static_cast<size_t>(t)] = f;
      parent_role[static_cast<size_t>(t)] = role;
    }

  std::vector<int> root_of(static_cast<size_t>(n), -1);
  for (int v = 0; v < n; ++v) {
    int w = v;
    while (w != -1 && !core.count(w)) w = parent[static_cast<size_t>(w)];
    root_of[static_cast<size_t>(v)] = w;
  }

  for (const auto& [name, d] : i.named) {
    std::map<int, long long> members;  // dense in i -> external id
    for (int v = 0; v < n; ++v)
      if (root_of[static_cast<size_t>(v)] == d)
        members.emplace(v, i.ids[static_cast<size_t>(v)]);
    Interpretation tr;
    std::map<int, int> remap;
    for (const auto& [v, id] : members)
      remap[v] = tr.add_element(id, i.labels[static_cast<size_t>(v)]);
    tr.named[name] = remap[d];
    for (const auto& [v, id] : members)
      if (v != d)
        tr.add_edge(parent_role[static_cast<size_t>(v)],
                    remap[parent[static_cast<size_t>(v)]], remap[v]);
    parts.tree.emplace(name, std::move(tr));
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Split-lemma equivalence check
// ---------------------------------------------------------------------------

namespace {

// The root-assignment match of the hat query: every variable x_a goes to the
// root a itself; atoms are verified directly against the interpretation.
bool hat_matches(const CQ& hat, const std::vector<std::string>& root_var,
                 const std::vector<std::string>& theta,
                 const Interpretation& i,
                 const std::map<std::string, int>& dense_of_name) {
  std::map<std::string, int> at;
  for (size_t k = 0; k < theta.size(); ++k)
    at[root_var[k]] = dense_of_name.at(theta[k]);
  for (const auto& a : hat.atoms) {
    if (!a.binary()) {
      if (!i.has_label(at.at(a.x), a.pred)) return false;
    } else if (!i.has_edge(a.pred, at.at(a.x), at.at(a.y))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::pair<bool, bool> split_equivalence_check(
    const Interpretation& i, const Signature& sig, const CQ& q,
    const std::vector<std::string>& answers) {
  if (answers.size() != q.answer_vars.size())
    throw OpError("answer tuple arity differs from the query's");
  for (const auto& name : answers)
    if (!i.named.count(name))
      throw OpError("answer individual is not named in the interpretation: " +
                    name);

  ForestParts parts = forest_parts(i, sig);

  std::vector<long long> ext;
  for (const auto& name : answers)
    ext.push_back(i.ids[static_cast<size_t>(i.named.at(name))]);
  UCQ u;
  u.cqs.push_back(q);
  bool direct = entails_on(i, u, ext);

  std::map<std::string, Interpretation> closed;
  for (const auto& [name, tr] : parts.tree)
    closed.emplace(name, transitive_closure(tr, sig));
  std::map<std::string, int> dense_of_name(i.named.begin(), i.named.end());
  std::map<std::string, size_t> theta_idx;
  for (size_t k = 0; k < parts.theta.size(); ++k)
    theta_idx[parts.theta[k]] = k;

  bool via = false;
  for (const Subdivision& p : subdivisions(q, sig)) {
    if (via) break;
    for (const ThetaSplit& s : enumerate_splits(p.query, parts.theta)) {
      // Answer variables must sit on their designated roots.
      bool ok = true;
      for (size_t j = 0; j < answers.size(); ++j) {
        const auto& uk = s.u[theta_idx.at(answers[j])];
        if (!std::binary_search(uk.begin(), uk.end(),
                                p.query.answer_vars[j])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      if (!is_admissible(p, s, parts.theta, sig)) continue;
      SplitQueries sq = split_queries(p.query, s, parts.theta);
      if (!hat_matches(sq.hat, sq.root_var, parts.theta, i, dense_of_name))
        continue;

      ok = true;
      for (size_t k = 0; k < parts.theta.size() && ok; ++k) {
        const CQ& qa = sq.at_root[k];
        if (qa.atoms.empty()) continue;
        const Interpretation& ta = closed.at(parts.theta[k]);
        Match seed;
        std::vector<std::string> qavars = vars_of(qa);
        if (!s.u[k].empty() &&
            contains_sorted(qavars, sq.root_var[k]))
          seed[sq.root_var[k]] =
              i.ids[static_cast<size_t>(dense_of_name.at(parts.theta[k]))];
        if (find_matches(qa, ta, seed, 1).empty()) ok = false;
      }
      if (ok) {
        via = true;
        break;
      }
    }
  }
  return {direct, via};
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

struct ReduceCtx {
  std::vector<std::string> inds;      // sorted ABox individuals
  std::map<std::string, size_t> ind_idx;
  std::vector<std::string> concepts;  // guessable concept names
  std::vector<std::string> roles;     // guessable role names
  Signature sig;                      // KB + query names with transitivity
  NormalTBox norm;
};

ReduceCtx make_ctx(const KnowledgeBase& kb, const UCQ& q) {
  ReduceCtx c;
  std::set<std::string> inds;
  for (const auto& [cn, a] : kb.abox.concept_asserts) inds.insert(a);
  for (const auto& ra : kb.abox.role_asserts) {
    inds.insert(ra[1]);
    inds.insert(ra[2]);
  }
  if (inds.empty()) throw OpError("the ABox declares no individuals");
  c.inds.assign(inds.begin(), inds.end());
  for (size_t k = 0; k < c.inds.size(); ++k) c.ind_idx[c.inds[k]] = k;

  // Names occurring in the KB; the core guesses exactly these. Fresh names
  // from normalization participate so that value restrictions routed through
  // them can constrain (and be satisfied by) the core.
  std::set<std::string> concepts, roles;
  for (const auto& ci : kb.tbox.cis) {
    collect_names(ci.lhs, concepts, roles);
    collect_names(ci.rhs, concepts, roles);
  }
  for (const auto& [cn, a] : kb.abox.concept_asserts) concepts.insert(cn);
  for (const auto& ra : kb.abox.role_asserts) roles.insert(ra[0]);
  NormalizeResult nr = normalize(kb.tbox);
  c.norm = nr.tbox;
  for (const auto& f : nr.fresh_names) concepts.insert(f);
  c.concepts.assign(concepts.begin(), concepts.end());
  c.roles.assign(roles.begin(), roles.end());

  c.sig = signature_of(kb);
  for (const auto& f : nr.fresh_names) c.sig.concepts.insert(f);
  for (const auto& cq : q.cqs) {
    for (const auto& rn : role_names_of(cq)) c.sig.roles.insert(rn);
    for (const auto& cn : concept_names_of(cq)) c.sig.concepts.insert(cn);
  }
  for (const auto& r : c.sig.roles)
    if (kb.sig.trans_roles.count(r)) c.sig.trans_roles.insert(r);
  return c;
}

bool forall_cis_hold(const Interpretation& j, const NormalTBox& norm) {
  for (const auto& ci : norm.cis) {
    if (ci.shape != NormalCI::Shape::Forall) continue;
    for (int d = 0; d < j.size(); ++d) {
      bool fires = true;
      for (const auto& cn : ci.lhs)
        if (!j.has_label(d, cn)) {
          fires = false;
          break;
        }
      if (!fires) continue;
      for (int e : j.out_neighbors(ci.role, d))
        if (!j.has_label(e, ci.filler)) return false;
    }
  }
  return true;
}

// All transitively closed core candidates: every concept/role cell over the
// ABox individuals beyond the asserted ones is guessed freely, the closure
// taken, and candidates violating a value restriction dropped. Deduplicated
// (distinct guesses can share a closure) and ordered by serialized form.
std::vector<Interpretation> enumerate_cores(const KnowledgeBase& kb,
                                            const ReduceCtx& c,
                                            const ReduceOptions& opt) {
  std::set<std::pair<std::string, std::string>> forced_labels;
  for (const auto& [cn, a] : kb.abox.concept_asserts)
    forced_labels.emplace(cn, a);
  std::set<std::array<std::string, 3>> forced_edges(
      kb.abox.role_asserts.begin(), kb.abox.role_asserts.end());

  struct Cell {
    bool edge;
    std::string n1, n2, n3;  // concept+ind, or role+from+to
  };
  std::vector<Cell> cells;
  for (const auto& cn : c.concepts)
    for (const auto& a : c.inds)
      if (!forced_labels.count({cn, a})) cells.push_back({false, cn, a, ""});
  for (const auto& r : c.roles)
    for (const auto& a : c.inds)
      for (const auto& b : c.inds)
        if (!forced_edges.count({r, a, b})) cells.push_back({true, r, a, b});
  if (cells.size() > opt.max_core_bits)
    throw OpError("core guess space too large: " +
                  std::to_string(cells.size()) + " free cells");

  std::map<std::string, Interpretation> dedup;
  for (uint64_t mask = 0; mask < (1ULL << cells.size()); ++mask) {
    Interpretation i0;
    for (size_t k = 0; k < c.inds.size(); ++k) {
      i0.add_element(static_cast<long long>(k), {});
      i0.named[c.inds[k]] = static_cast<int>(k);
    }
    auto dense = [&](const std::string& name) {
      return static_cast<int>(c.ind_idx.at(name));
    };
    for (const auto& [cn, a] : forced_labels) i0.add_label(dense(a), cn);
    for (const auto& fe : forced_edges)
      i0.add_edge(fe[0], dense(fe[1]), dense(fe[2]));
    for (size_t k = 0; k < cells.size(); ++k) {
      if (!(mask >> k & 1)) continue;
      const Cell& cell = cells[k];
      if (cell.edge)
        i0.add_edge(cell.n1, dense(cell.n2), dense(cell.n3));
      else
        i0.add_label(dense(cell.n2), cell.n1);
    }
    Interpretation j = transitive_closure(i0, c.sig);
    if (!forall_cis_hold(j, c.norm)) continue;
    dedup.emplace(serialize_interpretation(j), std::move(j));
  }
  std::vector<Interpretation> out;
  for (auto& [key, j] : dedup) out.push_back(std::move(j));
  return out;
}

// One nondeterministic resolution of a qualifying split: the root made
// responsible, the bucket its queries go to (0 anywhere-below, 1 rooted),
// and the disjuncts added.
struct Alternative {
  size_t root = 0;
  int bucket = 1;
  std::vector<CQ> add;
  std::string key;
};

void finish_alternative(Alternative& alt) {
  std::map<std::string, CQ> uniq;
  for (auto& cq : alt.add) uniq.emplace(cq_key(cq), cq);
  alt.add.clear();
  alt.key = std::to_string(alt.bucket) + "@" + std::to_string(alt.root);
  for (auto& [key, cq] : uniq) {
    alt.add.push_back(std::move(cq));
    alt.key += "|" + key;
  }
}

void sort_alternatives(std::vector<Alternative>& alts) {
  std::map<std::string, Alternative> uniq;
  for (auto& a : alts) uniq.emplace(a.key, std::move(a));
  alts.clear();
  for (auto& [key, a] : uniq) alts.push_back(std::move(a));
}

// Drops from a tree query every subtree hanging off the answer variable
// except the one entered through the picked atom (pick < 0 keeps everything;
// it is only passed when the answer variable has no outgoing binary atom).
CQ trim_to_one_root_atom(const CQ& tq, int pick) {
  if (pick < 0) return tq;
  const std::string& x = tq.answer_vars[0];
  const Atom& kept = tq.atoms[static_cast<size_t>(pick)];
  std::set<std::string> keep_vars = {x, kept.y};
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& a : tq.atoms)
      if (a.binary() && a.x != x && keep_vars.count(a.x) &&
          !keep_vars.count(a.y)) {
        keep_vars.insert(a.y);
        grew = true;
      }
  }
  CQ out;
  out.name = tq.name;
  out.answer_vars = tq.answer_vars;
  for (const auto& a : tq.atoms) {
    if (!a.binary()) {
      if (keep_vars.count(a.x)) out.atoms.push_back(a);
    } else if (a == kept || (a.x != x && keep_vars.count(a.x))) {
      out.atoms.push_back(a);
    }
  }
  out.canonicalize();
  return out;
}

size_t answer_binary_degree(const CQ& q) {
  if (q.answer_vars.empty()) return 0;
  const std::string& x = q.answer_vars[0];
  size_t deg = 0;
  for (const auto& a : q.atoms)
    if (a.binary() && (a.x == x || a.y == x)) ++deg;
  return deg;
}

// Alternatives of one qualifying split under the rooted reduction: choose a
// root with U_a nonempty, turn the split query at that root into an
// equivalent union of tree queries, and for each tree query choose which
// root atom survives the trim.
std::vector<Alternative> rooted_alternatives(const ThetaSplit& s,
                                             const SplitQueries& sq,
                                             const ReduceCtx& ctx,
                                             const ReduceOptions& opt) {
  std::vector<Alternative> alts;
  for (size_t k = 0; k < ctx.inds.size(); ++k) {
    if (s.u[k].empty()) continue;
    CQ unary = sq.at_root[k];
    unary.answer_vars = {sq.root_var[k]};
    unary.canonicalize();
    UCQ trees = treeify(unary, ctx.sig);
    if (trees.cqs.empty()) {
      // No tree can satisfy this split query at its root: the countermodel
      // obligation is vacuous, so the run adds nothing for it.
      Alternative alt;
      alt.root = k;
      finish_alternative(alt);
      alts.push_back(std::move(alt));
      continue;
    }
    std::vector<std::vector<int>> options;
    uint64_t total = 1;
    for (const auto& tq : trees.cqs) {
      std::vector<int> picks;
      for (size_t i = 0; i < tq.atoms.size(); ++i)
        if (tq.atoms[i].binary() && tq.atoms[i].x == tq.answer_vars[0])
          picks.push_back(static_cast<int>(i));
      if (picks.empty()) picks.push_back(-1);
      total *= picks.size();
      options.push_back(std::move(picks));
      if (total > opt.max_runs)
        throw OpError("run budget exceeded while trimming tree queries");
    }
    std::vector<size_t> at(options.size(), 0);
    for (;;) {
      Alternative alt;
      alt.root = k;
      for (size_t t = 0; t < options.size(); ++t) {
        CQ trimmed = trim_to_one_root_atom(trees.cqs[t], options[t][at[t]]);
        if (answer_binary_degree(trimmed) > 1)
          throw std::logic_error("trimmed tree query kept several root atoms");
        alt.add.push_back(std::move(trimmed));
      }
      finish_alternative(alt);
      alts.push_back(std::move(alt));
      size_t t = 0;
      while (t < options.size() && ++at[t] == options[t].size()) {
        at[t] = 0;
        ++t;
      }
      if (t == options.size()) break;
    }
  }
  sort_alternatives(alts);
  return alts;
}

// Alternatives of one qualifying split under the single-transitive-role
// reduction: choose a root with U_a or V_a nonempty, then either pick one
// compiled piece of the root-containing component (rooted bucket) or one
// whole component away from the root (anywhere-below bucket).
std::vector<Alternative> single_trans_alternatives(const ThetaSplit& s,
                                                   const SplitQueries& sq,
                                                   const ReduceCtx& ctx) {
  std::vector<Alternative> alts;
  for (size_t k = 0; k < ctx.inds.size(); ++k) {
    bool has_u = !s.u[k].empty(), has_v = !s.v[k].empty();
    if (!has_u && !has_v) continue;
    const CQ& qa = sq.at_root[k];
    const std::string& x = sq.root_var[k];
    auto comps = atom_components(qa);
    int comp_x = -1;
    for (size_t ci = 0; ci < comps.size(); ++ci)
      if (mentions_var(qa, comps[ci], x)) comp_x = static_cast<int>(ci);

    if (has_u && comp_x >= 0) {
      CQ rooted = component_cq(qa, comps[static_cast<size_t>(comp_x)], {x});
      auto pieces = compile_unary_ptqs(rooted, ctx.sig);
      if (!pieces) {
        // The rooted component matches no tree at its root at all; the
        // countermodel obligation is vacuous.
        Alternative alt;
        alt.root = k;
        finish_alternative(alt);
        alts.push_back(std::move(alt));
      } else {
        for (const auto& piece : *pieces) {
          Alternative alt;
          alt.root = k;
          alt.add.push_back(piece.query);
          finish_alternative(alt);
          alts.push_back(std::move(alt));
        }
      }
    }
    if (has_v) {
      for (size_t ci = 0; ci < comps.size(); ++ci) {
        if (static_cast<int>(ci) == comp_x) continue;
        CQ boolean_comp = component_cq(qa, comps[ci], {});
        auto ptq = compile_boolean_ptq(boolean_comp, ctx.sig);
        if (!ptq)
          throw std::logic_error(
              "admissible split component failed PTQ compilation");
        Alternative alt;
        alt.root = k;
        alt.bucket = 0;
        alt.add.push_back(ptq->query);
        finish_alternative(alt);
        alts.push_back(std::move(alt));
      }
    }
  }
  sort_alternatives(alts);
  return alts;
}

// Collects, for one core candidate, the alternative sets of all qualifying
// splits of subdivisions of Q's disjuncts. Returns nothing when a qualifying
// split admits no alternative: such a core cannot be extended to a
// countermodel and produces no runs. `abar` selects the rooted variant
// (answer variables pinned to their roots).
std::optional<std::vector<std::vector<Alternative>>> collect_qualifying(
    const KnowledgeBase& kb, const ReduceCtx& ctx, const Interpretation& j,
    const UCQ& q, const std::vector<std::string>* abar,
    const ReduceOptions& opt) {
  (void)kb;
  std::map<std::string, int> dense_of_name(j.named.begin(), j.named.end());
  std::map<std::string, std::vector<std::vector<Alternative>>::size_type>
      seen;
  std::vector<std::vector<Alternative>> quals;
  for (const CQ& disjunct : q.cqs) {
    for (const Subdivision& p : subdivisions(disjunct, ctx.sig)) {
      for (const ThetaSplit& s : enumerate_splits(p.query, ctx.inds)) {
        if (abar) {
          bool pinned = true;
          for (size_t jx = 0; jx < abar->size(); ++jx) {
            const auto& uk = s.u[ctx.ind_idx.at((*abar)[jx])];
            if (!std::binary_search(uk.begin(), uk.end(),
                                    p.query.answer_vars[jx])) {
              pinned = false;
              break;
            }
          }
          if (!pinned) continue;
        }
        if (!is_admissible(p, s, ctx.inds, ctx.sig)) continue;
        SplitQueries sq = split_queries(p.query, s, ctx.inds);
        if (!hat_matches(sq.hat, sq.root_var, ctx.inds, j, dense_of_name))
          continue;
        std::vector<Alternative> alts =
            abar ? rooted_alternatives(s, sq, ctx, opt)
                 : single_trans_alternatives(s, sq, ctx);
        if (alts.empty()) return std::nullopt;
        std::string key;
        for (const auto& a : alts) key += a.key + "&";
        if (seen.emplace(key, quals.size()).second)
          quals.push_back(std::move(alts));
      }
    }
  }
  return quals;
}

// Depth-first product over the qualifying splits' alternatives. Each leaf is
// one run body: per (root, bucket) the chosen disjuncts keyed canonically.
using RunBody = std::map<std::pair<size_t, int>, std::map<std::string, CQ>>;

std::vector<RunBody> enumerate_run_bodies(
    const std::vector<std::vector<Alternative>>& quals,
    const ReduceOptions& opt, size_t already) {
  std::vector<RunBody> out;
  RunBody acc;
  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == quals.size()) {
      if (already + out.size() >= opt.max_runs)
        throw OpError("run budget exceeded");
      out.push_back(acc);
      return;
    }
    for (const Alternative& alt : quals[i]) {
      std::vector<std::pair<std::pair<size_t, int>, std::string>> inserted;
      for (const CQ& cq : alt.add) {
        auto key = cq_key(cq);
        auto& bucket = acc[{alt.root, alt.bucket}];
        if (bucket.emplace(key, cq).second)
          inserted.push_back({{alt.root, alt.bucket}, key});
      }
      rec(i + 1);
      for (const auto& [slot, key] : inserted) acc[slot].erase(key);
    }
  };
  rec(0);
  return out;
}

std::map<std::string, std::set<std::string>> types_of(
    const ReduceCtx& ctx, const Interpretation& j) {
  std::map<std::string, std::set<std::string>> tau;
  for (size_t k = 0; k < ctx.inds.size(); ++k) {
    const auto& ls = j.label_set(static_cast<int>(k));
    tau[ctx.inds[k]] = std::set<std::string>(ls.begin(), ls.end());
  }
  return tau;
}

UCQ bucket_to_ucq(const RunBody& body, size_t root, int bucket) {
  UCQ u;
  auto it = body.find({root, bucket});
  if (it == body.end()) return u;
  for (const auto& [key, cq] : it->second) u.cqs.push_back(cq);
  return u;
}

std::string body_key(const RunBody& body) {
  std::string key;
  for (const auto& [slot, cqs] : body) {
    key += std::to_string(slot.first) + "." + std::to_string(slot.second);
    for (const auto& [ck, cq] : cqs) key += "|" + ck;
    key += ";";
  }
  return key;
}

}  // namespace

std::vector<RootedRun> reduce_rooted(const KnowledgeBase& kb, const UCQ& q,
                                     const std::vector<std::string>& abar,
                                     const ReduceOptions& opt) {
  ReduceCtx ctx = make_ctx(kb, q);
  for (const auto& a : abar)
    if (!ctx.ind_idx.count(a))
      throw OpError("tuple individual is not in the ABox: " + a);
  for (const CQ& d : q.cqs) {
    if (d.answer_vars.size() != abar.size())
      throw OpError("query arity differs from the answer tuple's");
    if (!graph_info(d).rooted)
      throw OpError("rooted reduction requires rooted disjuncts");
  }

  std::map<std::string, RootedRun> uniq;
  size_t produced = 0;
  for (const Interpretation& j : enumerate_cores(kb, ctx, opt)) {
    auto quals = collect_qualifying(kb, ctx, j, q, &abar, opt);
    if (!quals) continue;
    std::string jkey = serialize_interpretation(j);
    for (const RunBody& body : enumerate_run_bodies(*quals, opt, produced)) {
      RootedRun run;
      run.core = j;
      run.tau = types_of(ctx, j);
      for (size_t k = 0; k < ctx.inds.size(); ++k) {
        UCQ u = bucket_to_ucq(body, k, 1);
        for (const CQ& tq : u.cqs)
          if (answer_binary_degree(tq) > 1)
            throw std::logic_error(
                "rooted run produced a tree query with several root atoms");
        run.q1[ctx.inds[k]] = std::move(u);
      }
      ++produced;
      uniq.emplace(jkey + "#" + body_key(body), std::move(run));
    }
  }
  std::vector<RootedRun> out;
  for (auto& [key, run] : uniq) out.push_back(std::move(run));
  return out;
}

std::vector<SingleTransRun> reduce_single_trans(const KnowledgeBase& kb,
                                                const UCQ& q,
                                                const ReduceOptions& opt) {
  ReduceCtx ctx = make_ctx(kb, q);
  for (const CQ& d : q.cqs)
    if (!d.answer_vars.empty())
      throw OpError(
          "single-transitive-role reduction requires a Boolean query");

  {
    std::set<std::string> trans_used;
    for (const CQ& d : q.cqs)
      for (const auto& r : role_names_of(d))
        if (ctx.sig.is_transitive(r)) trans_used.insert(r);
    if (trans_used.size() > 1)
      throw OpError("the query uses two transitive roles");
    std::set<std::string> tbox_roles;
    for (const auto& ci : kb.tbox.cis) {
      std::set<std::string> cs;
      collect_names(ci.lhs, cs, tbox_roles);
      collect_names(ci.rhs, cs, tbox_roles);
    }
    for (const auto& r : tbox_roles)
      if (ctx.sig.is_transitive(r)) trans_used.insert(r);
    if (trans_used.size() > 1)
      throw OpError(
          "the TBox and query together use two transitive roles");
  }

  // Size budgets asserted on every produced run. Anywhere-below disjuncts
  // are whole components of Q's disjuncts (fresh midpoints never survive in
  // them), so their count is bounded by the total component count; rooted
  // disjuncts are pieces of at most doubled disjuncts, so their sizes and
  // subquery counts stay within fixed linear/quadratic budgets.
  size_t comp_bound = 0, bin_total = 0, atoms_max = 0;
  for (const CQ& d : q.cqs) {
    comp_bound += atom_components(d).size();
    size_t bin = 0;
    for (const auto& a : d.atoms)
      if (a.binary()) ++bin;
    bin_total += bin;
    atoms_max = std::max(atoms_max, d.atoms.size());
  }
  size_t piece_atoms_bound = 2 * atoms_max + 1;
  size_t subptq_bound = (2 * bin_total + q.cqs.size()) * (2 * atoms_max + 1);

  std::map<std::string, SingleTransRun> uniq;
  size_t produced = 0;
  for (const Interpretation& j : enumerate_cores(kb, ctx, opt)) {
    auto quals = collect_qualifying(kb, ctx, j, q, nullptr, opt);
    if (!quals) continue;
    std::string jkey = serialize_interpretation(j);
    for (const RunBody& body : enumerate_run_bodies(*quals, opt, produced)) {
      SingleTransRun run;
      run.core = j;
      run.tau = types_of(ctx, j);
      for (size_t k = 0; k < ctx.inds.size(); ++k) {
        UCQ u0 = bucket_to_ucq(body, k, 0);
        UCQ u1 = bucket_to_ucq(body, k, 1);
        if (u0.cqs.size() > comp_bound)
          throw std::logic_error(
              "anywhere-below queries exceed the component budget");
        size_t subptq_total = 0;
        for (const CQ& d : u1.cqs) {
          if (d.atoms.size() > piece_atoms_bound)
            throw std::logic_error("rooted piece exceeds the size budget");
          subptq_total += subptqs(d, ctx.sig).size();
        }
        if (subptq_total > subptq_bound)
          throw std::logic_error("rooted pieces exceed the subquery budget");
        run.q0[ctx.inds[k]] = std::move(u0);
        run.q1[ctx.inds[k]] = std::move(u1);
      }
      ++produced;
      uniq.emplace(jkey + "#" + body_key(body), std::move(run));
    }
  }
  std::vector<SingleTransRun> out;
  for (auto& [key, run] : uniq) out.push_back(std::move(run));
  return out;
}

}  // namespace sqel
