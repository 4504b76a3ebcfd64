#include "sqel/kb.hpp"

#include <cassert>
#include <functional>
#include <map>

namespace sqel {

// ---------------------------------------------------------------------------
// Concept constructors
// ---------------------------------------------------------------------------

ConceptRef c_top() {
  static ConceptRef t = std::make_shared<Concept>(Concept{Concept::Kind::Top, "", "", {}});
  return t;
}
ConceptRef c_bot() {
  static ConceptRef b = std::make_shared<Concept>(Concept{Concept::Kind::Bot, "", "", {}});
  return b;
}
ConceptRef c_name(std::string n) {
  return std::make_shared<Concept>(Concept{Concept::Kind::Name, std::move(n), "", {}});
}
ConceptRef c_not(ConceptRef c) {
  return std::make_shared<Concept>(Concept{Concept::Kind::Not, "", "", {std::move(c)}});
}
ConceptRef c_and(std::vector<ConceptRef> kids) {
  if (kids.empty()) return c_top();
  if (kids.size() == 1) return kids[0];
  return std::make_shared<Concept>(Concept{Concept::Kind::And, "", "", std::move(kids)});
}
ConceptRef c_or(std::vector<ConceptRef> kids) {
  if (kids.empty()) return c_bot();
  if (kids.size() == 1) return kids[0];
  return std::make_shared<Concept>(Concept{Concept::Kind::Or, "", "", std::move(kids)});
}
ConceptRef c_some(std::string role, ConceptRef c) {
  return std::make_shared<Concept>(
      Concept{Concept::Kind::Some, "", std::move(role), {std::move(c)}});
}
ConceptRef c_all(std::string role, ConceptRef c) {
  return std::make_shared<Concept>(
      Concept{Concept::Kind::All, "", std::move(role), {std::move(c)}});
}

std::string concept_key(const ConceptRef& c) {
  switch (c->kind) {
    case Concept::Kind::Top:
      return "top";
    case Concept::Kind::Bot:
      return "bot";
    case Concept::Kind::Name:
      return c->name;
    case Concept::Kind::Not:
      return "(not " + concept_key(c->kids[0]) + ")";
    case Concept::Kind::And:
    case Concept::Kind::Or: {
      std::string s = c->kind == Concept::Kind::And ? "(and" : "(or";
      for (const auto& k : c->kids) s += " " + concept_key(k);
      return s + ")";
    }
    case Concept::Kind::Some:
      return "(some " + c->role + " " + concept_key(c->kids[0]) + ")";
    case Concept::Kind::All:
      return "(all " + c->role + " " + concept_key(c->kids[0]) + ")";
  }
  return "";
}

ConceptRef nnf(const ConceptRef& c) {
  std::function<ConceptRef(const ConceptRef&, bool)> go =
      [&](const ConceptRef& e, bool pos) -> ConceptRef {
    switch (e->kind) {
      case Concept::Kind::Top:
        return pos ? c_top() : c_bot();
      case Concept::Kind::Bot:
        return pos ? c_bot() : c_top();
      case Concept::Kind::Name:
        return pos ? e : c_not(e);
      case Concept::Kind::Not:
        return go(e->kids[0], !pos);
      case Concept::Kind::And:
      case Concept::Kind::Or: {
        bool is_and = (e->kind == Concept::Kind::And) == pos;
        std::vector<ConceptRef> kids;
        kids.reserve(e->kids.size());
        for (const auto& k : e->kids) kids.push_back(go(k, pos));
        return is_and ? c_and(std::move(kids)) : c_or(std::move(kids));
      }
      case Concept::Kind::Some:
        return pos ? c_some(e->role, go(e->kids[0], true))
                   : c_all(e->role, go(e->kids[0], false));
      case Concept::Kind::All:
        return pos ? c_all(e->role, go(e->kids[0], true))
                   : c_some(e->role, go(e->kids[0], false));
    }
    return e;
  };
  return go(c, true);
}

// ---------------------------------------------------------------------------
// Signature collection
// ---------------------------------------------------------------------------

void collect_names(const ConceptRef& c, std::set<std::string>& concepts,
                   std::set<std::string>& roles) {
  switch (c->kind) {
    case Concept::Kind::Name:
      concepts.insert(c->name);
      break;
    case Concept::Kind::Some:
    case Concept::Kind::All:
      roles.insert(c->role);
      break;
    default:
      break;
  }
  for (const auto& k : c->kids) collect_names(k, concepts, roles);
}

Signature signature_of(const KnowledgeBase& kb) {
  Signature sig = kb.sig;  // declared roles carry transitivity
  for (const auto& ci : kb.tbox.cis) {
    collect_names(ci.lhs, sig.concepts, sig.roles);
    collect_names(ci.rhs, sig.concepts, sig.roles);
  }
  for (const auto& [a, x] : kb.abox.concept_asserts) {
    sig.concepts.insert(a);
    sig.individuals.insert(x);
  }
  for (const auto& ra : kb.abox.role_asserts) {
    sig.roles.insert(ra[0]);
    sig.individuals.insert(ra[1]);
    sig.individuals.insert(ra[2]);
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

namespace {

// Recognizers for inclusions that are already in normal form.

bool conj_of_names(const ConceptRef& c, std::vector<std::string>& out) {
  switch (c->kind) {
    case Concept::Kind::Top:
      return true;
    case Concept::Kind::Name:
      out.push_back(c->name);
      return true;
    case Concept::Kind::And:
      for (const auto& k : c->kids)
        if (!conj_of_names(k, out)) return false;
      return true;
    default:
      return false;
  }
}

bool disj_of_names(const ConceptRef& c, std::vector<std::string>& out,
                   bool& has_top) {
  switch (c->kind) {
    case Concept::Kind::Bot:
      return true;
    case Concept::Kind::Top:
      has_top = true;
      return true;
    case Concept::Kind::Name:
      out.push_back(c->name);
      return true;
    case Concept::Kind::Or:
      for (const auto& k : c->kids)
        if (!disj_of_names(k, out, has_top)) return false;
      return true;
    default:
      return false;
  }
}

class Normalizer {
 public:
  explicit Normalizer(const std::set<std::string>& used) : used_(used) {}

  void add_ci(const ConceptRef& lhs, const ConceptRef& rhs) {
    std::vector<std::string> ln;
    if (conj_of_names(lhs, ln)) {
      sort_unique(ln);
      emit_named_lhs(ln, rhs);
    } else {
      // Fold the inclusion into top <= not-lhs or rhs and flatten that.
      emit_named_lhs({}, c_or({c_not(lhs), rhs}));
    }
    // Definitions for names introduced above, breadth first.
    while (!pending_.empty()) {
      auto [x, c] = pending_.front();
      pending_.erase(pending_.begin());
      emit_named_lhs({x}, c);
    }
  }

  NormalizeResult take() {
    NormalizeResult r;
    r.tbox.cis = std::move(out_);
    r.fresh_names = std::move(fresh_);
    return r;
  }

 private:
  // lhs is a sorted set of names (empty = top).
  void emit_named_lhs(std::vector<std::string> lhs, const ConceptRef& rhs0) {
    ConceptRef rhs = nnf(rhs0);
    std::vector<std::string> rn;
    bool has_top = false;
    if (disj_of_names(rhs, rn, has_top)) {
      if (has_top) return;  // trivially true
      sort_unique(rn);
      out_.push_back({NormalCI::Shape::Subsume, std::move(lhs), std::move(rn), "", ""});
      return;
    }
    if (rhs->kind == Concept::Kind::Some || rhs->kind == Concept::Kind::All) {
      if (lhs.size() <= 1) {
        std::string filler = name_for(rhs->kids[0]);
        auto shape = rhs->kind == Concept::Kind::Some ? NormalCI::Shape::Exists
                                                      : NormalCI::Shape::Forall;
        out_.push_back({shape, std::move(lhs), {}, rhs->role, std::move(filler)});
        return;
      }
      // Conjunctive lhs in front of a role restriction: name the lhs first.
      std::string a = fresh();
      out_.push_back({NormalCI::Shape::Subsume, std::move(lhs), {a}, "", ""});
      emit_named_lhs({a}, rhs);
      return;
    }
    if (rhs->kind == Concept::Kind::And) {
      for (const auto& k : rhs->kids) emit_named_lhs(lhs, k);
      return;
    }
    if (rhs->kind == Concept::Kind::Not) {
      // ¬A with A a name (rhs is in NNF): move A to the left.
      assert(rhs->kids[0]->kind == Concept::Kind::Name);
      std::vector<std::string> l2 = lhs;
      l2.push_back(rhs->kids[0]->name);
      sort_unique(l2);
      out_.push_back({NormalCI::Shape::Subsume, std::move(l2), {}, "", ""});
      return;
    }
    // Disjunction with at least one non-name disjunct: name the offenders.
    assert(rhs->kind == Concept::Kind::Or);
    std::vector<std::string> rn2;
    for (const auto& k : rhs->kids) {
      std::vector<std::string> part;
      bool top2 = false;
      if (disj_of_names(k, part, top2)) {
        if (top2) return;
        rn2.insert(rn2.end(), part.begin(), part.end());
      } else {
        rn2.push_back(name_for(k));
      }
    }
    sort_unique(rn2);
    out_.push_back({NormalCI::Shape::Subsume, std::move(lhs), std::move(rn2), "", ""});
  }

  // Returns a name X and queues inclusions making X imply c. Reuses the
  // name when the same subconcept was seen before.
  std::string name_for(const ConceptRef& c0) {
    ConceptRef c = nnf(c0);
    if (c->kind == Concept::Kind::Name) return c->name;
    std::string key = concept_key(c);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::string x = fresh();
    memo_.emplace(key, x);
    pending_.emplace_back(x, c);
    return x;
  }

  std::string fresh() {
    for (;;) {
      std::string cand = "_n" + std::to_string(counter_++);
      if (!used_.count(cand)) {
        fresh_.push_back(cand);
        return cand;
      }
    }
  }

  const std::set<std::string>& used_;
  std::vector<NormalCI> out_;
  std::vector<std::string> fresh_;
  std::map<std::string, std::string> memo_;
  std::vector<std::pair<std::string, ConceptRef>> pending_;
  int counter_ = 0;
};

}  // namespace

NormalizeResult normalize(const TBox& t) {
  std::set<std::string> used, roles;
  for (const auto& ci : t.cis) {
    collect_names(ci.lhs, used, roles);
    collect_names(ci.rhs, used, roles);
  }
  Normalizer n(used);
  for (const auto& ci : t.cis) n.add_ci(ci.lhs, ci.rhs);
  return n.take();
}

TBox to_general(const NormalTBox& t) {
  TBox out;
  for (const auto& ci : t.cis) {
    std::vector<ConceptRef> ls;
    for (const auto& a : ci.lhs) ls.push_back(c_name(a));
    ConceptRef lhs = c_and(std::move(ls));
    ConceptRef rhs;
    switch (ci.shape) {
      case NormalCI::Shape::Subsume: {
        std::vector<ConceptRef> rs;
        for (const auto& b : ci.rhs) rs.push_back(c_name(b));
        rhs = c_or(std::move(rs));
        break;
      }
      case NormalCI::Shape::Exists:
        rhs = c_some(ci.role, c_name(ci.filler));
        break;
      case NormalCI::Shape::Forall:
        rhs = c_all(ci.role, c_name(ci.filler));
        break;
    }
    out.cis.push_back({lhs, rhs});
  }
  return out;
}

NormalTBox restrict_to_role(const NormalTBox& t, const std::string& r,
                            const Signature& sig) {
  if (!sig.roles.count(r)) throw OpError("undeclared role " + r);
  NormalTBox out;
  for (const auto& ci : t.cis) {
    if (ci.shape == NormalCI::Shape::Subsume || ci.role == r)
      out.cis.push_back(ci);
  }
  return out;
}

std::set<std::string> concept_names_of(const NormalTBox& t) {
  std::set<std::string> out;
  for (const auto& ci : t.cis) {
    out.insert(ci.lhs.begin(), ci.lhs.end());
    out.insert(ci.rhs.begin(), ci.rhs.end());
    if (ci.shape != NormalCI::Shape::Subsume) out.insert(ci.filler);
  }
  return out;
}

std::set<std::string> role_names_of(const NormalTBox& t) {
  std::set<std::string> out;
  for (const auto& ci : t.cis)
    if (ci.shape != NormalCI::Shape::Subsume) out.insert(ci.role);
  return out;
}

std::string normal_ci_key(const NormalCI& ci) {
  std::string s;
  if (ci.lhs.empty()) {
    s = "top";
  } else {
    for (size_t i = 0; i < ci.lhs.size(); ++i)
      s += (i ? " & " : "") + ci.lhs[i];
  }
  s += " <= ";
  switch (ci.shape) {
    case NormalCI::Shape::Subsume:
      if (ci.rhs.empty()) {
        s += "bot";
      } else {
        for (size_t i = 0; i < ci.rhs.size(); ++i)
          s += (i ? " | " : "") + ci.rhs[i];
      }
      break;
    case NormalCI::Shape::Exists:
      s += "some " + ci.role + "." + ci.filler;
      break;
    case NormalCI::Shape::Forall:
      s += "all " + ci.role + "." + ci.filler;
      break;
  }
  return s;
}

}  // namespace sqel
