#pragma once

#include <set>
#include <string>
#include <vector>

#include "sqel/interp.hpp"
#include "sqel/kb.hpp"
#include "sqel/query.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Countermodel shrinking for acyclic unions over one transitive role
// ---------------------------------------------------------------------------
//
// Input throughout: a finite, transitively closed tree interpretation over a
// single transitive role t, a normal-form inclusion set over t, and an
// acyclic Boolean union of conjunctive queries over t that the tree does not
// satisfy. The shrinker extracts a sub-collection of the tree's elements of
// size bounded by a factorial in the number of inclusion-set concept names,
// rewires them, and returns a closed interpretation that still satisfies the
// inclusions and still avoids the union.

/// One Boolean query per disjunct of the input union, attached to a tree
/// element. Each query has no match inside the element's subtree (the
/// element together with everything below it).
struct ForbiddenTuple {
  std::vector<CQ> qs;  // canonicalized Boolean CQs, in input disjunct order

  bool operator==(const ForbiddenTuple&) const = default;
};

/// Assigns to every element of a transitively closed tree a tuple of
/// forbidden queries, one per disjunct of q. The root receives the disjuncts
/// themselves. Walking down one level: for each query, pin at the current
/// element those initial variables (no incoming binary atom) whose unary
/// atoms all hold there, drop every atom touching a pinned variable, and pass
/// to all direct children the first (in canonical order) connected component
/// of the remainder that has no match in any child's subtree. Such a
/// component always exists while the tuple invariant holds.
///
/// Returns one tuple per dense element. Postconditions checked internally:
/// no tuple entry matches within its element's subtree, and along every
/// closed edge (u,v) each entry at v is an atom-subset of the entry at u.
///
/// Throws OpError if i is not a transitively closed tree, if some disjunct
/// is non-Boolean or has a directed cycle, if more than one role occurs, or
/// if q already matches in i (the invariant is then unestablishable; the
/// message carries the offending match).
std::vector<ForbiddenTuple> forbidden_assignment(const Interpretation& i,
                                                 const Signature& sig,
                                                 const UCQ& q);

/// The set of inclusion-set concept names carried by elements strictly
/// reachable from elem: {A in concept_names_of(tbox) | some b with
/// (elem,b) an edge of the transitive role has label A}. Defined on any
/// interpretation whose transitive-role extent is transitively closed;
/// anti-monotone along edges (checked across the whole extent on every
/// call). Throws OpError if elem is out of range, several transitive roles
/// occur, or the extent is not closed.
std::set<std::string> visible_concepts(const Interpretation& i,
                                       const Signature& sig,
                                       const NormalTBox& tbox, int elem);

/// Result of shrinking: a transitively closed interpretation over a subset
/// of the input's elements. Element k of interp is element kept[k] of the
/// input (kept is strictly increasing), with identical external id and
/// labels; root is interp's dense index of the input tree's root.
struct ShrunkModel {
  Interpretation interp;
  std::vector<int> kept;
  int root = -1;
};

/// Shrinks a transitively closed tree i that satisfies tbox and avoids the
/// acyclic Boolean union q into a small closed interpretation J with:
///   1. elements a subset of i's, each keeping its exact label set;
///   2. |J| <= (|concept_names_of(tbox)| + 1)! ;
///   3. the tree root kept;
///   4. J satisfying tbox;
///   5. J avoiding q.
/// All five are re-verified on the output; a failure there is an internal
/// error (std::logic_error). The construction recurses on the visible-concept
/// sets: at each element it descends to a deepest element whose visible set
/// is still full, keeps one witness per visible concept name (first in
/// element-id order) found below that element, and hangs the recursively
/// shrunk witness subtrees under the current element. Shared witnesses are
/// reused, so the output can be far smaller than the bound.
///
/// Throws OpError when a precondition fails: shape or closure violations,
/// several roles, non-Boolean or cyclic disjuncts, i violating tbox (the
/// message names the first failing inclusion), or i matching q (the message
/// carries the match).
ShrunkModel shrink_transitive_tree(const Interpretation& i,
                                   const Signature& sig,
                                   const NormalTBox& tbox, const UCQ& q);

}  // namespace sqel
