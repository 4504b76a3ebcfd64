#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqel/kb.hpp"
#include "sqel/query.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Interpretations
// ---------------------------------------------------------------------------

/// Finite interpretation. Elements carry external integer ids (as written in
/// files); internally they are dense indices 0..size-1 in increasing id
/// order. Role extents are sorted edge lists over dense indices.
struct Interpretation {
  std::vector<long long> ids;                       // dense -> external id
  std::vector<std::vector<std::string>> labels;     // sorted concept names
  std::map<std::string, std::vector<std::pair<int, int>>> edges;  // sorted
  std::map<std::string, int> named;                 // individual -> dense

  int size() const { return static_cast<int>(ids.size()); }

  /// Dense index for an external id, or -1.
  int dense_of(long long id) const;

  /// Adds an element (id must be new); returns its dense index. Invalidates
  /// nothing (dense indices are assigned in insertion order), but callers
  /// that need id-sorted order should build via make_interpretation.
  int add_element(long long id, std::vector<std::string> labs);

  void add_edge(const std::string& role, int from, int to);
  bool has_edge(const std::string& role, int from, int to) const;
  bool has_label(int elem, const std::string& concept_name) const;
  void add_label(int elem, const std::string& concept_name);

  std::vector<int> out_neighbors(const std::string& role, int from) const;
  std::vector<int> in_neighbors(const std::string& role, int to) const;

  /// Concept names appearing on the element, as a sorted set.
  const std::vector<std::string>& label_set(int elem) const { return labels[elem]; }

  bool operator==(const Interpretation&) const = default;
};

/// Builds an interpretation with elements renumbered in increasing external
/// id order and all edge lists sorted and deduplicated.
Interpretation canonicalize(const Interpretation& i);

/// Closes every transitive role of sig under transitivity. Non-transitive
/// roles are untouched. Idempotent and monotone.
Interpretation transitive_closure(const Interpretation& i, const Signature& sig);

/// Extent of a (general) concept over i, as a bitmask per dense element.
std::vector<char> eval_concept(const Interpretation& i, const ConceptRef& c);

// ---------------------------------------------------------------------------
// Model checking
// ---------------------------------------------------------------------------

struct ModelViolation {
  enum class Kind { CI, Transitivity, MissingIndividual, ConceptAssert, RoleAssert };
  Kind kind;
  std::string detail;  // human-readable description
  int element = -1;    // offending element where applicable (dense)
};

struct ModelReport {
  std::vector<ModelViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks i against all inclusions of t and transitivity of the transitive
/// roles of sig.
ModelReport check_model(const Interpretation& i, const TBox& t, const Signature& sig);
ModelReport check_model(const Interpretation& i, const NormalTBox& t, const Signature& sig);

/// Checks the ABox: every individual must be named in i, and all assertions
/// must hold.
ModelReport check_model_abox(const Interpretation& i, const ABox& a);

/// Checks the inclusions of t at element e only (the quantified concepts are
/// still evaluated over all of i).
ModelReport check_local(const Interpretation& i, int e, const NormalTBox& t);

// ---------------------------------------------------------------------------
// Query matching
// ---------------------------------------------------------------------------

/// A match assigns an element (external id) to every variable.
using Match = std::map<std::string, long long>;

/// All matches of CQ q in i extending seed, up to limit. Concept or role
/// names absent from i have empty extents. Throws OpError if seed binds a
/// variable not occurring in q or an id not in i. Deterministic: variables
/// are assigned most-constrained-first (ties by name), candidates tried in
/// element-id order.
std::vector<Match> find_matches(const CQ& q, const Interpretation& i,
                                const Match& seed = {},
                                size_t limit = SIZE_MAX);

/// True if some disjunct of ucq has a match sending the answer variables to
/// the given elements (external ids; empty for Boolean queries).
bool entails_on(const Interpretation& i, const UCQ& ucq,
                const std::vector<long long>& answers = {});

// ---------------------------------------------------------------------------
// Shape classification
// ---------------------------------------------------------------------------

enum class ShapeClass { Tree, TransitiveTree, ThetaForest, Other };

struct ShapeReport {
  ShapeClass shape = ShapeClass::Other;
  int root = -1;                    // Tree / TransitiveTree (dense index)
  Interpretation underlying;        // TransitiveTree: the unique generator tree
  std::set<std::string> theta;      // ThetaForest: the individual names used
  std::string reason;               // why the next-more-specific class failed
};

/// Classifies i as a tree, the transitive closure of a tree, a Θ-forest with
/// Θ the named individuals of i, or other. Parallel edges between the same
/// ordered pair (two roles or repeated role) disqualify trees.
ShapeReport classify_shape(const Interpretation& i, const Signature& sig);

/// Recovers the generator of i read as a Θ-forest over its named elements:
/// the edges between named elements plus one parent edge per anonymous
/// element, chosen so that the generator's transitive closure is i. Named
/// elements keep all mutual edges (self-edges included); anonymous elements
/// must hang below exactly one parent and may not point back at a named
/// element. Returns the generator, or nullopt with the obstacle in `reason`.
/// A transitively closed tree whose root is the one named element is the
/// single-root special case and is accepted.
std::optional<Interpretation> theta_forest_generator(const Interpretation& i,
                                                     const Signature& sig,
                                                     std::string& reason);

// ---------------------------------------------------------------------------
// Unraveling
// ---------------------------------------------------------------------------

struct Unraveling {
  Interpretation interp;       // the unraveled interpretation
  std::vector<int> base;       // node -> source element (dense in source)
  std::vector<int> parent;     // node -> parent node, -1 for the root
  std::vector<std::string> parent_role;  // role of the edge from parent
};

/// Unravels i from root (dense index) into a tree of paths of length up to
/// depth_cap. Nodes are paths; a node for path p with endpoint x gets x's
/// labels and one child per edge (x, r, y) of i, labeled y. Children are
/// generated in (role, target-id) order.
Unraveling unravel(const Interpretation& i, int root, int depth_cap);

}  // namespace sqel
