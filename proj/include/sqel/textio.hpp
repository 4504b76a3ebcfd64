#pragma once

#include <string>

#include "sqel/interp.hpp"
#include "sqel/kb.hpp"
#include "sqel/query.hpp"

namespace sqel {

// Line-oriented text formats. Parsers throw ParseError carrying 1-based line
// and column. Serializers emit a canonical ordering, so
// parse(serialize(parse(x))) == parse(x).

// --- knowledge bases -------------------------------------------------------
//
//   # comment
//   trans t            (declares a transitive role)
//   role s             (declares a plain role)
//   ci <concept> <= <concept>
//   assert A(a)
//   assert r(a,b)
//
// Concepts: (and C...), (or C...), (not C), (some r C), (all r C), top, bot,
// or a concept name. Roles must be declared before use.

KnowledgeBase parse_kb(const std::string& text);
std::string serialize_kb(const KnowledgeBase& kb);

// --- interpretations -------------------------------------------------------
//
//   elem <id> {A,B}
//   edge <role> <from-id> <to-id>
//   named <individual> <id>
//
// line0 offsets the reported line numbers when the text is embedded in a
// larger file.

Interpretation parse_interpretation(const std::string& text, int line0 = 1);
std::string serialize_interpretation(const Interpretation& i);

// --- queries ----------------------------------------------------------------
//
//   trans t            (optional role declarations; undeclared roles in
//   role s              atoms are taken as plain roles)
//   query <name>(<vars?>): A(x), r(x,y), ...
//
// Every query line contributes one CQ; the file is a UCQ, and all lines must
// agree on the answer arity.

struct QueryFile {
  UCQ ucq;
  Signature sig;  // roles (with transitivity) and concept names in use
};

QueryFile parse_query_file(const std::string& text);
std::string serialize_query_file(const QueryFile& qf);

// --- helpers ----------------------------------------------------------------

std::string read_file(const std::string& path);
/// Writes atomically (temp file + rename).
void write_file(const std::string& path, const std::string& content);

}  // namespace sqel
