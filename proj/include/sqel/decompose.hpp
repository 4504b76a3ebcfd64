#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sqel/interp.hpp"
#include "sqel/kb.hpp"
#include "sqel/query.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Subdivisions
// ---------------------------------------------------------------------------

/// A subdivision of a CQ: a selection of transitive atoms t(x,z) replaced by
/// t(x,y), t(y,z) with a fresh midpoint variable y per replaced atom.
/// Substituting each fresh variable away (collapsing the two half atoms back
/// into one) recovers the original query.
struct Subdivision {
  CQ query;
  std::vector<std::string> fresh;  // sorted fresh midpoint variables
};

/// All subdivisions of q obtained by subdividing each transitive atom at most
/// once: one entry per subset of q's transitive binary atoms, the unmodified
/// query first, deterministic order. One midpoint per atom suffices for the
/// split search because a match of a crossing atom passes through exactly one
/// element of the target root's tree boundary.
std::vector<Subdivision> subdivisions(const CQ& q, const Signature& sig);

// ---------------------------------------------------------------------------
// Theta-splits
// ---------------------------------------------------------------------------

/// A split of a query's variables against a set of roots Θ: for each root a
/// (position-aligned with the sorted theta vector) the sets U_a (variables
/// mapped onto the root a itself) and V_a (variables mapped strictly inside
/// the tree below a). Invariants:
///   (S1) the union of all U_a and V_a covers the query's variables;
///   (S2) all 2|Θ| sets are pairwise disjoint;
///   (S3) successors of a V_a variable stay in V_a;
///   (S4) successors of a U_a variable land in V_a or in some U_b (b = a
///        included: an atom between two U_a variables collapses to a core
///        self-edge at a, which forest cores may carry).
struct ThetaSplit {
  std::vector<std::vector<std::string>> u;  // per root, sorted
  std::vector<std::vector<std::string>> v;  // per root, sorted
};

/// Exactly the families (U_a, V_a) over theta satisfying (S1)-(S4), in a
/// deterministic order (variables in sorted order, each assigned U_a1, V_a1,
/// U_a2, ... with the last variable cycling fastest).
std::vector<ThetaSplit> enumerate_splits(const CQ& p,
                                         const std::vector<std::string>& theta);

// ---------------------------------------------------------------------------
// Split queries
// ---------------------------------------------------------------------------

/// The queries induced by a split σ of p over Θ:
///   q_sigma:  p with every U_a variable replaced by the single variable x_a;
///   hat:      the restriction of q_sigma to the x_a variables (Boolean);
///   at_root:  per root a, the restriction q_sigma^a of q_sigma to
///             {x_a} ∪ V_a, without binary atoms lying entirely on x_a
///             (those are core atoms of the hat; trees never satisfy them);
///             it carries answer variable x_a when U_a ≠ ∅ and some atom
///             crosses from U_a into V_a, and is Boolean otherwise;
///   root_var: per root a, the variable name x_a (meaningful as a variable of
///             q_sigma only when U_a ≠ ∅).
/// The intended evaluation maps x_a to the root a itself; at_root queries for
/// distinct roots share no variables.
struct SplitQueries {
  CQ q_sigma;
  CQ hat;
  std::vector<CQ> at_root;
  std::vector<std::string> root_var;
};

SplitQueries split_queries(const CQ& p, const ThetaSplit& sigma,
                           const std::vector<std::string>& theta);

/// Admissibility of a split σ of a subdivision p: (1) every q_sigma^a has a
/// match to the transitive closure of some tree-shaped interpretation
/// (checked per connected component via tree_matchable; components can always
/// be combined under a common fresh root), and (2) every fresh midpoint
/// variable of the subdivision lies in some U_a.
bool is_admissible(const Subdivision& p, const ThetaSplit& sigma,
                   const std::vector<std::string>& theta,
                   const Signature& sig);

// ---------------------------------------------------------------------------
// Forest decomposition
// ---------------------------------------------------------------------------

/// A forest-shaped interpretation split into its core and its trees: theta
/// holds the sorted individual names, core is the restriction to the named
/// elements (with their labels and mutual edges), and tree maps each name to
/// the induced tree hanging below that root (root included, original external
/// ids and labels kept, not transitively closed).
struct ForestParts {
  std::vector<std::string> theta;
  Interpretation core;
  std::map<std::string, Interpretation> tree;
};

/// Decomposes i into core and induced trees. Accepts interpretations that
/// classify as a theta-forest, or as a (transitive) tree whose single root is
/// the only named element. Throws OpError otherwise, and when i is not equal
/// to its own transitive closure.
ForestParts forest_parts(const Interpretation& i, const Signature& sig);

// ---------------------------------------------------------------------------
// Split-lemma equivalence check
// ---------------------------------------------------------------------------

/// Evaluates a query over a forest-shaped interpretation two ways and returns
/// both verdicts: first componentwise matching (find_matches on i), then via
/// the split characterization - existence of an admissible split σ of a
/// subdivision p of q such that (a) the root assignment x_a ↦ a matches the
/// hat query in i, with answer variables additionally pinned to their roots
/// via membership in U_a, and (b) each q_sigma^a matches the transitive
/// closure of the tree below a, sending x_a to a whenever U_a ≠ ∅.
/// The two verdicts agree on every forest; the answers vector (individual
/// names, aligned with q's answer variables) selects the rooted variant.
/// Throws OpError if i does not decompose as a forest or an answer name is
/// not an individual of i.
std::pair<bool, bool> split_equivalence_check(
    const Interpretation& i, const Signature& sig, const CQ& q,
    const std::vector<std::string>& answers = {});

// ---------------------------------------------------------------------------
// Reductions to per-individual entailment over types
// ---------------------------------------------------------------------------

struct ReduceOptions {
  /// Upper bound on the number of free concept/role cells in the guessed
  /// core interpretation (2^bits candidate cores are enumerated).
  std::size_t max_core_bits = 20;
  /// Upper bound on the number of runs produced (before deduplication).
  std::size_t max_runs = 200000;
};

/// One run of the rooted reduction: a transitively closed core over the ABox
/// individuals (every concept/role cell beyond the asserted ones guessed),
/// the full label type of each individual in it, and per individual the
/// union tree query Q1 that a countermodel extending this core must refute
/// below that individual. The knowledge base does not entail the query at
/// the given tuple iff for some run every (tbox, tau[a]) refutes q1[a].
struct RootedRun {
  Interpretation core;
  std::map<std::string, std::set<std::string>> tau;
  std::map<std::string, UCQ> q1;
};

/// Enumerates the runs of the rooted reduction for Q(abar). Every TQ placed
/// in a q1 has its answer variable in at most one binary atom. Requires each
/// disjunct of Q to be rooted (connected, with answer variables matching
/// abar's arity) and every abar entry to be an ABox individual; throws
/// OpError otherwise, and when a guess space exceeds the options' caps.
std::vector<RootedRun> reduce_rooted(const KnowledgeBase& kb, const UCQ& q,
                                     const std::vector<std::string>& abar,
                                     const ReduceOptions& opt = {});

/// One run of the single-transitive-role reduction: as RootedRun, with per
/// individual a Boolean union query q0 (matched anywhere in the tree below)
/// and a unary union query q1 (matched at the root). The knowledge base does
/// not entail Q iff for some run every individual a has (tbox, tau[a])
/// refuting both q0[a] and q1[a].
struct SingleTransRun {
  Interpretation core;
  std::map<std::string, std::set<std::string>> tau;
  std::map<std::string, UCQ> q0;
  std::map<std::string, UCQ> q1;
};

/// Enumerates the runs of the single-transitive-role reduction for a Boolean
/// UCQ. Requires at most one transitive role to occur across the TBox and
/// the query; throws OpError otherwise (in particular when the query uses
/// two transitive roles), and when a guess space exceeds the options' caps.
/// Guarantees, asserted at run construction: the number of disjuncts in each
/// q0 is bounded by the total number of connected components over Q's
/// disjuncts, and the total subPTQ count over each q1 stays within a fixed
/// quadratic polynomial of Q's size.
std::vector<SingleTransRun> reduce_single_trans(const KnowledgeBase& kb,
                                                const UCQ& q,
                                                const ReduceOptions& opt = {});

}  // namespace sqel
