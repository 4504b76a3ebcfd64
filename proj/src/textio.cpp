#include "sqel/textio.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace sqel {

namespace {

struct Tok {
  std::string text;
  int col = 0;  // 1-based
};

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
         c == '.' || c == '\'';
}

// Splits a line into identifiers, parens, commas, braces and the '<=' arrow.
std::vector<Tok> lex_line(const std::string& line, int lineno) {
  std::vector<Tok> out;
  size_t k = 0;
  while (k < line.size()) {
    char c = line[k];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++k;
      continue;
    }
    int col = static_cast<int>(k) + 1;
    if (c == '(' || c == ')' || c == ',' || c == '{' || c == '}' || c == ':') {
      out.push_back({std::string(1, c), col});
      ++k;
      continue;
    }
    if (c == '<' && k + 1 < line.size() && line[k + 1] == '=') {
      out.push_back({"<=", col});
      k += 2;
      continue;
    }
    if (ident_char(c)) {
      size_t b = k;
      while (k < line.size() && ident_char(line[k])) ++k;
      out.push_back({line.substr(b, k - b), col});
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", lineno, col);
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

class TokStream {
 public:
  TokStream(std::vector<Tok> toks, int lineno)
      : toks_(std::move(toks)), line_(lineno) {}

  bool done() const { return pos_ >= toks_.size(); }
  const Tok& peek() const {
    if (done()) throw ParseError("unexpected end of line", line_, last_col());
    return toks_[pos_];
  }
  Tok next() {
    Tok t = peek();
    ++pos_;
    return t;
  }
  void expect(const std::string& s) {
    Tok t = next();
    if (t.text != s)
      throw ParseError("expected '" + s + "', got '" + t.text + "'", line_, t.col);
  }
  int line() const { return line_; }
  int last_col() const {
    return toks_.empty() ? 1 : toks_.back().col + (int)toks_.back().text.size();
  }

 private:
  std::vector<Tok> toks_;
  size_t pos_ = 0;
  int line_;
};

bool is_word(const std::string& s) {
  if (s.empty()) return false;
  return ident_char(s[0]) && s != "<=";
}

ConceptRef parse_concept(TokStream& ts, const Signature& sig) {
  Tok t = ts.next();
  if (t.text == "top") return c_top();
  if (t.text == "bot") return c_bot();
  if (t.text == "(") {
    Tok op = ts.next();
    if (op.text == "and" || op.text == "or") {
      std::vector<ConceptRef> kids;
      while (ts.peek().text != ")") kids.push_back(parse_concept(ts, sig));
      ts.expect(")");
      if (kids.empty())
        throw ParseError("empty " + op.text, ts.line(), op.col);
      return op.text == "and" ? c_and(std::move(kids)) : c_or(std::move(kids));
    }
    if (op.text == "not") {
      ConceptRef k = parse_concept(ts, sig);
      ts.expect(")");
      return c_not(k);
    }
    if (op.text == "some" || op.text == "all") {
      Tok role = ts.next();
      if (!is_word(role.text))
        throw ParseError("expected role name", ts.line(), role.col);
      if (!sig.roles.count(role.text))
        throw ParseError("undeclared role " + role.text, ts.line(), role.col);
      ConceptRef k = parse_concept(ts, sig);
      ts.expect(")");
      return op.text == "some" ? c_some(role.text, k) : c_all(role.text, k);
    }
    throw ParseError("unknown operator '" + op.text + "'", ts.line(), op.col);
  }
  if (is_word(t.text)) return c_name(t.text);
  throw ParseError("expected concept, got '" + t.text + "'", ts.line(), t.col);
}

}  // namespace

// ---------------------------------------------------------------------------
// Knowledge bases
// ---------------------------------------------------------------------------

KnowledgeBase parse_kb(const std::string& text) {
  KnowledgeBase kb;
  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); ++li) {
    int lineno = static_cast<int>(li) + 1;
    auto toks = lex_line(lines[li], lineno);
    if (toks.empty()) continue;
    TokStream ts(std::move(toks), lineno);
    Tok head = ts.next();

    if (head.text == "trans" || head.text == "role") {
      Tok r = ts.next();
      if (!is_word(r.text))
        throw ParseError("expected role name", lineno, r.col);
      bool want_trans = head.text == "trans";
      if (kb.sig.roles.count(r.text)) {
        bool was_trans = kb.sig.trans_roles.count(r.text) != 0;
        if (was_trans != want_trans)
          throw ParseError("role " + r.text +
                               " redeclared with different transitivity",
                           lineno, r.col);
      }
      kb.sig.roles.insert(r.text);
      if (want_trans) kb.sig.trans_roles.insert(r.text);
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      continue;
    }

    if (head.text == "ci") {
      ConceptRef lhs = parse_concept(ts, kb.sig);
      ts.expect("<=");
      ConceptRef rhs = parse_concept(ts, kb.sig);
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      collect_names(lhs, kb.sig.concepts, kb.sig.roles);
      collect_names(rhs, kb.sig.concepts, kb.sig.roles);
      kb.tbox.cis.push_back({lhs, rhs});
      continue;
    }

    if (head.text == "assert") {
      Tok pred = ts.next();
      if (!is_word(pred.text))
        throw ParseError("expected predicate name", lineno, pred.col);
      ts.expect("(");
      Tok a1 = ts.next();
      if (!is_word(a1.text))
        throw ParseError("expected individual name", lineno, a1.col);
      Tok sep = ts.next();
      if (sep.text == ")") {
        if (pred.text == "top" || pred.text == "bot")
          throw ParseError("assertions need a concept name", lineno, pred.col);
        kb.sig.concepts.insert(pred.text);
        kb.sig.individuals.insert(a1.text);
        kb.abox.concept_asserts.emplace_back(pred.text, a1.text);
      } else if (sep.text == ",") {
        Tok a2 = ts.next();
        if (!is_word(a2.text))
          throw ParseError("expected individual name", lineno, a2.col);
        ts.expect(")");
        if (!kb.sig.roles.count(pred.text))
          throw ParseError("undeclared role " + pred.text, lineno, pred.col);
        kb.sig.individuals.insert(a1.text);
        kb.sig.individuals.insert(a2.text);
        kb.abox.role_asserts.push_back({pred.text, a1.text, a2.text});
      } else {
        throw ParseError("expected ',' or ')'", lineno, sep.col);
      }
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      continue;
    }

    throw ParseError("unknown statement '" + head.text + "'", lineno, head.col);
  }
  return kb;
}

std::string serialize_kb(const KnowledgeBase& kb) {
  std::ostringstream out;
  for (const auto& r : kb.sig.roles)
    out << (kb.sig.trans_roles.count(r) ? "trans " : "role ") << r << "\n";
  for (const auto& ci : kb.tbox.cis)
    out << "ci " << concept_key(ci.lhs) << " <= " << concept_key(ci.rhs) << "\n";
  for (const auto& [c, a] : kb.abox.concept_asserts)
    out << "assert " << c << "(" << a << ")\n";
  for (const auto& ra : kb.abox.role_asserts)
    out << "assert " << ra[0] << "(" << ra[1] << "," << ra[2] << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Interpretations
// ---------------------------------------------------------------------------

Interpretation parse_interpretation(const std::string& text, int line0) {
  Interpretation raw;
  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); ++li) {
    int lineno = line0 + static_cast<int>(li);
    auto toks = lex_line(lines[li], lineno);
    if (toks.empty()) continue;
    TokStream ts(std::move(toks), lineno);
    Tok head = ts.next();

    auto parse_id = [&]() -> long long {
      Tok t = ts.next();
      try {
        size_t used = 0;
        long long v = std::stoll(t.text, &used);
        if (used != t.text.size()) throw std::invalid_argument("");
        return v;
      } catch (...) {
        throw ParseError("expected element id, got '" + t.text + "'", lineno,
                         t.col);
      }
    };

    if (head.text == "elem") {
      long long id = parse_id();
      if (raw.dense_of(id) >= 0)
        throw ParseError("duplicate element " + std::to_string(id), lineno,
                         head.col);
      ts.expect("{");
      std::vector<std::string> labs;
      bool expect_name = true;
      for (;;) {
        Tok t = ts.next();
        if (t.text == "}") break;
        if (t.text == ",") {
          if (expect_name)
            throw ParseError("expected concept name", lineno, t.col);
          expect_name = true;
          continue;
        }
        if (!is_word(t.text) || !expect_name)
          throw ParseError("expected concept name or '}'", lineno, t.col);
        labs.push_back(t.text);
        expect_name = false;
      }
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      raw.add_element(id, std::move(labs));
      continue;
    }

    if (head.text == "edge") {
      Tok role = ts.next();
      if (!is_word(role.text))
        throw ParseError("expected role name", lineno, role.col);
      long long a = parse_id(), b = parse_id();
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      int da = raw.dense_of(a), db = raw.dense_of(b);
      if (da < 0)
        throw ParseError("unknown element " + std::to_string(a), lineno,
                         role.col);
      if (db < 0)
        throw ParseError("unknown element " + std::to_string(b), lineno,
                         role.col);
      raw.add_edge(role.text, da, db);
      continue;
    }

    if (head.text == "named") {
      Tok ind = ts.next();
      if (!is_word(ind.text))
        throw ParseError("expected individual name", lineno, ind.col);
      long long id = parse_id();
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      int d = raw.dense_of(id);
      if (d < 0)
        throw ParseError("unknown element " + std::to_string(id), lineno,
                         ind.col);
      raw.named[ind.text] = d;
      continue;
    }

    throw ParseError("unknown statement '" + head.text + "'", lineno, head.col);
  }
  return canonicalize(raw);
}

std::string serialize_interpretation(const Interpretation& i0) {
  Interpretation i = canonicalize(i0);
  std::ostringstream out;
  for (int e = 0; e < i.size(); ++e) {
    out << "elem " << i.ids[e] << " {";
    for (size_t k = 0; k < i.labels[e].size(); ++k)
      out << (k ? "," : "") << i.labels[e][k];
    out << "}\n";
  }
  for (const auto& [role, es] : i.edges)
    for (const auto& [f, t] : es)
      out << "edge " << role << " " << i.ids[f] << " " << i.ids[t] << "\n";
  for (const auto& [n, d] : i.named)
    out << "named " << n << " " << i.ids[d] << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

QueryFile parse_query_file(const std::string& text) {
  QueryFile qf;
  auto lines = split_lines(text);
  int arity = -1;
  for (size_t li = 0; li < lines.size(); ++li) {
    int lineno = static_cast<int>(li) + 1;
    auto toks = lex_line(lines[li], lineno);
    if (toks.empty()) continue;
    TokStream ts(std::move(toks), lineno);
    Tok head = ts.next();

    if (head.text == "trans" || head.text == "role") {
      Tok r = ts.next();
      if (!is_word(r.text))
        throw ParseError("expected role name", lineno, r.col);
      bool want_trans = head.text == "trans";
      if (qf.sig.roles.count(r.text)) {
        bool was = qf.sig.trans_roles.count(r.text) != 0;
        if (was != want_trans)
          throw ParseError("role " + r.text +
                               " redeclared with different transitivity",
                           lineno, r.col);
      }
      qf.sig.roles.insert(r.text);
      if (want_trans) qf.sig.trans_roles.insert(r.text);
      if (!ts.done())
        throw ParseError("trailing tokens", lineno, ts.peek().col);
      continue;
    }

    if (head.text != "query")
      throw ParseError("unknown statement '" + head.text + "'", lineno,
                       head.col);

    CQ q;
    Tok name = ts.next();
    if (!is_word(name.text))
      throw ParseError("expected query name", lineno, name.col);
    q.name = name.text;
    ts.expect("(");
    for (;;) {
      Tok t = ts.next();
      if (t.text == ")") break;
      if (t.text == ",") continue;
      if (!is_word(t.text))
        throw ParseError("expected answer variable", lineno, t.col);
      q.answer_vars.push_back(t.text);
    }
    ts.expect(":");
    while (!ts.done()) {
      Tok pred = ts.next();
      if (pred.text == ",") continue;
      if (!is_word(pred.text))
        throw ParseError("expected atom", lineno, pred.col);
      ts.expect("(");
      Tok v1 = ts.next();
      if (!is_word(v1.text))
        throw ParseError("expected variable", lineno, v1.col);
      Tok sep = ts.next();
      if (sep.text == ")") {
        q.atoms.push_back(unary_atom(pred.text, v1.text));
        qf.sig.concepts.insert(pred.text);
      } else if (sep.text == ",") {
        Tok v2 = ts.next();
        if (!is_word(v2.text))
          throw ParseError("expected variable", lineno, v2.col);
        ts.expect(")");
        q.atoms.push_back(binary_atom(pred.text, v1.text, v2.text));
        qf.sig.roles.insert(pred.text);
      } else {
        throw ParseError("expected ',' or ')'", lineno, sep.col);
      }
    }
    for (const auto& v : q.answer_vars) {
      bool used = false;
      for (const auto& a : q.atoms)
        used = used || a.x == v || a.y == v;
      if (!used)
        throw ParseError("answer variable " + v + " not used in atoms", lineno,
                         name.col);
    }
    if (arity == -1) arity = static_cast<int>(q.answer_vars.size());
    if (arity != static_cast<int>(q.answer_vars.size()))
      throw ParseError("answer arity differs from previous queries", lineno,
                       name.col);
    q.canonicalize();
    qf.ucq.cqs.push_back(std::move(q));
  }
  return qf;
}

std::string serialize_query_file(const QueryFile& qf) {
  std::ostringstream out;
  for (const auto& r : qf.sig.roles)
    out << (qf.sig.trans_roles.count(r) ? "trans " : "role ") << r << "\n";
  for (const auto& q : qf.ucq.cqs) {
    out << "query " << q.name << "(";
    for (size_t k = 0; k < q.answer_vars.size(); ++k)
      out << (k ? "," : "") << q.answer_vars[k];
    out << "):";
    CQ c = q;
    c.canonicalize();
    for (size_t k = 0; k < c.atoms.size(); ++k)
      out << (k ? ", " : " ") << atom_key(c.atoms[k]);
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OpError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw OpError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw OpError("write failed: " + tmp.string());
  }
  fs::rename(tmp, p);
}

}  // namespace sqel
