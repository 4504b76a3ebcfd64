#pragma once

// Shared query fixtures used across the test binaries: the two running
// example queries plus small signature/query builders.

#include <string>
#include <vector>

#include "sqel/query.hpp"

namespace fixtures {

inline sqel::Signature sig_t_s() {
  sqel::Signature sig;
  sig.roles = {"t", "s"};
  sig.trans_roles = {"t"};
  return sig;
}

inline sqel::Signature sig_both_trans() {
  sqel::Signature sig;
  sig.roles = {"t", "s"};
  sig.trans_roles = {"t", "s"};
  return sig;
}

inline sqel::CQ cq(std::vector<sqel::Atom> atoms,
                   std::vector<std::string> answer = {}) {
  sqel::CQ q;
  q.name = "q";
  q.answer_vars = std::move(answer);
  q.atoms = std::move(atoms);
  q.canonicalize();
  return q;
}

// Branching hub: one transitive cluster of four t-atoms over {x,y,z,u} with a
// plain s-spoke hanging off each of x, y, z.
inline sqel::CQ hub_query(std::vector<std::string> answer = {}) {
  using sqel::binary_atom;
  return cq({binary_atom("s", "x", "v1"), binary_atom("s", "y", "v2"),
             binary_atom("s", "z", "v3"), binary_atom("t", "x", "y"),
             binary_atom("t", "u", "y"), binary_atom("t", "u", "z"),
             binary_atom("t", "y", "z")},
            std::move(answer));
}

// Two plain fans meeting two transitive fans in a cycle of variable sharing;
// matchable in a transitive tree yet without any cluster tree when both roles
// are transitive.
inline sqel::CQ double_fan_query() {
  using sqel::binary_atom;
  using sqel::unary_atom;
  return cq({binary_atom("s", "x2", "x1"), binary_atom("s", "x3", "x1"),
             binary_atom("t", "x2", "x4"), binary_atom("t", "x3", "x5"),
             binary_atom("t", "x6", "x4"), binary_atom("t", "x7", "x5"),
             binary_atom("s", "x6", "x8"), binary_atom("s", "x7", "x8"),
             unary_atom("B", "x1"), unary_atom("A", "x4"),
             unary_atom("C", "x5"), unary_atom("D", "x8")});
}

}  // namespace fixtures
