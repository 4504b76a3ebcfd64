#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqel/kb.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Conjunctive queries
// ---------------------------------------------------------------------------

/// A query atom: A(x) when y is empty, r(x,y) otherwise.
struct Atom {
  std::string pred;
  std::string x;
  std::string y;

  bool binary() const { return !y.empty(); }
  bool operator==(const Atom&) const = default;
  auto operator<=>(const Atom&) const = default;
};

inline Atom unary_atom(std::string a, std::string x) {
  return Atom{std::move(a), std::move(x), ""};
}
inline Atom binary_atom(std::string r, std::string x, std::string y) {
  return Atom{std::move(r), std::move(x), std::move(y)};
}

/// Conjunctive query with 0 or more answer variables. Atom order is
/// irrelevant (set semantics); canonicalize() sorts and deduplicates.
struct CQ {
  std::string name;
  std::vector<std::string> answer_vars;
  std::vector<Atom> atoms;

  bool boolean() const { return answer_vars.empty(); }
  void canonicalize();
  bool operator==(const CQ&) const = default;
};

/// Union of CQs sharing one answer-variable tuple arity.
struct UCQ {
  std::vector<CQ> cqs;
};

std::vector<std::string> vars_of(const CQ& q);
std::set<std::string> concept_names_of(const CQ& q);
std::set<std::string> role_names_of(const CQ& q);
std::string atom_key(const Atom& a);
std::string cq_key(const CQ& q);

/// Applies a variable substitution; atoms are re-canonicalized.
CQ rename_vars(const CQ& q, const std::map<std::string, std::string>& sub);

/// Restriction of q to the atoms whose variables all lie in keep.
CQ restrict_vars(const CQ& q, const std::set<std::string>& keep);

// ---------------------------------------------------------------------------
// Query graph predicates
// ---------------------------------------------------------------------------

struct QueryGraphInfo {
  bool acyclic = true;    // directed graph of binary atoms has no cycle
  bool connected = true;  // undirected reachability covers all variables
  bool rooted = false;    // connected and at least one answer variable
  bool has_parallel_edges = false;  // two atoms over the same ordered pair
  std::vector<std::string> initial_vars;  // no incoming binary atom
};

QueryGraphInfo graph_info(const CQ& q);

/// True if q's binary atoms form a directed tree rooted at root_var with no
/// parallel edges (the shape of tree queries).
bool is_tree_query(const CQ& q, const std::string& root_var);

// ---------------------------------------------------------------------------
// Clusters
// ---------------------------------------------------------------------------

/// A cluster of binary atoms: for a non-transitive role, a maximal set of
/// atoms r(x,·) sharing role and source; for a transitive role, a maximal
/// set of t-atoms connected via shared variables.
struct Cluster {
  std::string role;
  bool transitive = false;
  std::vector<Atom> atoms;          // sorted
  std::vector<std::string> vars;    // sorted variables of the atoms

  bool operator==(const Cluster&) const = default;
};

/// All clusters of q, deterministically ordered (by role, then first atom).
std::vector<Cluster> clusters(const CQ& q, const Signature& sig);

/// Initial variables of a cluster: no incoming atom within the cluster.
std::vector<std::string> cluster_initial_vars(const Cluster& c);

// ---------------------------------------------------------------------------
// Fork elimination
// ---------------------------------------------------------------------------

/// Variable equivalence produced by exhaustive fork elimination:
///   (dagger) r(x,z), r(y,z') with r non-transitive and z ~ z' forces x ~ y;
///   (ddagger) r(x,y), s(x',y') with r,s non-transitive and y, y' in the
///             variable set of one transitive cluster forces y ~ y'.
/// The quotient maps every variable to the least variable of its class,
/// except that an answer variable always represents its class.
/// Sound for matches into transitive trees: identified variables take equal
/// values in every such match.
struct ForkResult {
  CQ quotient;
  std::map<std::string, std::string> representative;  // var -> class rep
};

enum class ForkMode {
  RecomputeClusters,  // re-derive t-clusters on the current quotient each round
  FixedClusters,      // use only the t-clusters of the input query
};

/// Precondition: q is unary or Boolean. Queries over several transitive
/// roles are accepted; (ddagger) then ranges over the clusters of each one.
ForkResult fork_eliminate(const CQ& q, const Signature& sig,
                          ForkMode mode = ForkMode::RecomputeClusters);

// ---------------------------------------------------------------------------
// Matchability into transitive trees
// ---------------------------------------------------------------------------

/// Decides whether a connected CQ has a match to the transitive closure of
/// some tree-shaped interpretation. Exhaustively identifies (R1) sources of
/// same-role non-transitive fork targets and (R2) distinct initial variables
/// of transitive clusters, then tests that the result is acyclic and no
/// variable has incoming atoms over two different roles.
bool tree_matchable(const CQ& q, const Signature& sig);

}  // namespace sqel
