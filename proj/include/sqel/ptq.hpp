#pragma once

#include <optional>
#include <vector>

#include "sqel/query.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Cluster trees
// ---------------------------------------------------------------------------

/// A tree over all clusters of a query. Valid trees satisfy:
///   (a) two clusters share variables only as siblings or parent/child;
///   (b) siblings share a variable only if it also occurs in their parent;
///   (c) every non-root cluster shares exactly one variable with its parent,
///       and that variable is initial in the child (its entry variable).
struct ClusterTree {
  std::vector<Cluster> clusters;            // canonical cluster order
  size_t root = 0;                          // index into clusters
  std::vector<int> parent;                  // -1 for the root
  std::vector<std::vector<size_t>> children;
  std::vector<std::string> entry;           // entry variable; "" for the root

  /// Indices of the subtree rooted at i (including i), ascending.
  std::vector<size_t> subtree(size_t i) const;
};

/// The unique cluster tree of q rooted at the given cluster, if one exists.
/// Once the root is fixed the tree is forced: clusters sharing a variable
/// with the root become its children, and so on; conditions (a)-(c) are then
/// verified. Throws OpError if root_cluster is not a cluster of q.
std::optional<ClusterTree> cluster_tree_for(const CQ& q, const Signature& sig,
                                            const Cluster& root_cluster);

/// The clusters that can serve as the root of some cluster tree of q.
std::vector<Cluster> root_clusters(const CQ& q, const Signature& sig);

// ---------------------------------------------------------------------------
// Pseudo-tree queries
// ---------------------------------------------------------------------------

/// A Boolean PTQ is a connected CQ that admits a cluster tree and whose
/// transitive clusters are all acyclic. A unary PTQ additionally has its
/// answer variable initial and contained in a single cluster, which is a
/// root cluster. Queries without binary atoms count as PTQs when they have
/// at most one variable. Recognition is limited to connected queries.
bool is_boolean_ptq(const CQ& q, const Signature& sig);
bool is_unary_ptq(const CQ& q, const Signature& sig);

/// A compiled PTQ: the query together with a witnessing cluster tree. The
/// tree is absent only for queries without binary atoms.
struct PTQ {
  CQ query;
  std::optional<ClusterTree> tree;
};

/// Compiles a connected Boolean CQ into an equivalent Boolean PTQ over
/// transitive-tree interpretations, or returns absent. For queries using at
/// most one transitive role, absence is exact: it means no transitive-tree
/// interpretation satisfies q. With several transitive roles no single PTQ
/// can capture the query in general; compilation then reports absent
/// whenever the fork quotient admits no cluster tree, even though a
/// transitive-tree match may exist. Throws OpError on disconnected input.
std::optional<PTQ> compile_boolean_ptq(const CQ& q, const Signature& sig);

/// Compiles a connected unary CQ q(x) into unary PTQs q1(x)..qk(x) such that
/// for every transitive-tree interpretation I with root a:
///   (I,a) satisfies q(x)  iff  (I,a) satisfies every qi(x).
/// Absent means no transitive-tree interpretation rooted at a satisfies
/// q(a) (exact for at most one transitive role, conservative otherwise).
/// Throws OpError when q is not unary or is disconnected.
std::optional<std::vector<PTQ>> compile_unary_ptqs(const CQ& q,
                                                   const Signature& sig);

/// All subPTQs of a PTQ: for each proper subtree of a cluster tree, the
/// unary query of the subtree's binary atoms plus all unary atoms over its
/// variables, answered at the subtree root's entry variable. Boolean PTQs
/// contribute the subtrees of every cluster tree (one per root cluster);
/// unary PTQs only those of the unique tree whose root contains the answer
/// variable. Duplicates are removed; order is deterministic. Throws OpError
/// if q is not a PTQ.
std::vector<CQ> subptqs(const CQ& q, const Signature& sig);

/// Rewrites a unary CQ q(x) into a union of tree queries equivalent to q
/// over transitive-tree interpretations rooted at the interpretation root.
/// Enumerates tree interpretations with at most |var(q)| nodes over q's
/// concept and role names, keeps those whose transitive closure satisfies q
/// at the root, and deduplicates up to isomorphism. Every returned tree
/// query has at most |var(q)| variables. Throws OpError when q is not unary.
UCQ treeify(const CQ& q, const Signature& sig);

}  // namespace sqel
