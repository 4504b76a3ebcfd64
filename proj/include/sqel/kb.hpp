#pragma once

#include <array>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sqel/util.hpp"

namespace sqel {

// ---------------------------------------------------------------------------
// Signature
// ---------------------------------------------------------------------------

/// Names in play: concept names, role names (with the transitive subset), and
/// individual names. Roles must be declared; concepts and individuals are
/// collected from use.
struct Signature {
  std::set<std::string> concepts;
  std::set<std::string> roles;
  std::set<std::string> trans_roles;  // subset of roles
  std::set<std::string> individuals;

  bool is_transitive(const std::string& r) const {
    return trans_roles.count(r) != 0;
  }
  void merge(const Signature& o) {
    concepts.insert(o.concepts.begin(), o.concepts.end());
    roles.insert(o.roles.begin(), o.roles.end());
    trans_roles.insert(o.trans_roles.begin(), o.trans_roles.end());
    individuals.insert(o.individuals.begin(), o.individuals.end());
  }
};

// ---------------------------------------------------------------------------
// Concepts
// ---------------------------------------------------------------------------

struct Concept;
using ConceptRef = std::shared_ptr<const Concept>;

/// Immutable concept expression.
struct Concept {
  enum class Kind { Top, Bot, Name, Not, And, Or, Some, All };
  Kind kind = Kind::Top;
  std::string name;  // Kind::Name
  std::string role;  // Kind::Some / Kind::All
  std::vector<ConceptRef> kids;
};

ConceptRef c_top();
ConceptRef c_bot();
ConceptRef c_name(std::string n);
ConceptRef c_not(ConceptRef c);
ConceptRef c_and(std::vector<ConceptRef> kids);
ConceptRef c_or(std::vector<ConceptRef> kids);
ConceptRef c_some(std::string role, ConceptRef c);
ConceptRef c_all(std::string role, ConceptRef c);

/// Canonical textual form; doubles as a structural-equality key.
std::string concept_key(const ConceptRef& c);

/// Negation normal form: negation appears only in front of concept names.
ConceptRef nnf(const ConceptRef& c);

// ---------------------------------------------------------------------------
// Knowledge bases
// ---------------------------------------------------------------------------

struct ConceptInclusion {
  ConceptRef lhs;
  ConceptRef rhs;
};

struct TBox {
  std::vector<ConceptInclusion> cis;
};

struct ABox {
  // A(a) assertions and r(a,b) assertions, in file order.
  std::vector<std::pair<std::string, std::string>> concept_asserts;
  std::vector<std::array<std::string, 3>> role_asserts;  // {role, a, b}
};

struct KnowledgeBase {
  Signature sig;
  TBox tbox;
  ABox abox;
};

/// Names occurring in a concept / TBox / KB (roles keep their declared
/// transitivity only when a signature is consulted; these collectors report
/// occurrence).
void collect_names(const ConceptRef& c, std::set<std::string>& concepts,
                   std::set<std::string>& roles);
Signature signature_of(const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Normal form
// ---------------------------------------------------------------------------

/// One concept inclusion in normal form. Three shapes:
///   Subsume:  A1 ⊓ ... ⊓ An  ⊑  B1 ⊔ ... ⊔ Bm   (empty lhs = top, empty rhs = bot)
///   Exists:   A ⊑ ∃r.B                            (lhs empty = top, else one name)
///   Forall:   A ⊑ ∀r.B
struct NormalCI {
  enum class Shape { Subsume, Exists, Forall };
  Shape shape = Shape::Subsume;
  std::vector<std::string> lhs;  // sorted conjunct names; empty means top
  std::vector<std::string> rhs;  // Subsume only: sorted disjunct names; empty means bot
  std::string role;              // Exists/Forall
  std::string filler;            // Exists/Forall

  bool operator==(const NormalCI&) const = default;
  auto operator<=>(const NormalCI&) const = default;
};

struct NormalTBox {
  std::vector<NormalCI> cis;
};

struct NormalizeResult {
  NormalTBox tbox;
  std::vector<std::string> fresh_names;  // introduced names, in order
};

/// Rewrites a TBox into normal form. The result is a conservative extension:
/// fresh names (prefix "_n") may be introduced, every model of the result is a
/// model of the input when restricted to the input signature, and every model
/// of the input expands to a model of the result. Inclusions already in
/// normal form pass through unchanged, so the rewrite is idempotent.
NormalizeResult normalize(const TBox& t);

/// Converts a normal TBox back to general inclusions (for serialization and
/// for the general-TBox model checker).
TBox to_general(const NormalTBox& t);

/// Keeps exactly the inclusions whose role symbols are within {r}: all
/// Subsume inclusions plus the Exists/Forall inclusions over r itself.
/// Throws OpError if r is not a declared role of sig.
NormalTBox restrict_to_role(const NormalTBox& t, const std::string& r,
                            const Signature& sig);

std::set<std::string> concept_names_of(const NormalTBox& t);
std::set<std::string> role_names_of(const NormalTBox& t);

/// Canonical one-line rendering of a normal inclusion (used in reports).
std::string normal_ci_key(const NormalCI& ci);

}  // namespace sqel
