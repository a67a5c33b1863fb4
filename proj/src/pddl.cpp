#include "plangen/pddl.hpp"

#include <algorithm>
#include <functional>
#include <cctype>
#include <set>
#include <sstream>

namespace plangen::pddl {

ParseError::ParseError(SourceLocation loc, const std::string &message)
    : Error(loc.file + ":" + std::to_string(loc.line) + ":" +
            std::to_string(loc.column) + ": " + message),
      loc_(std::move(loc)), message_(message) {}

namespace {

struct SExpr {
  bool is_list = false;
  std::string symbol;
  std::vector<SExpr> items;
  SourceLocation loc;

  bool is_symbol(std::string_view s) const {
    return !is_list && symbol == s;
  }
};

class Reader {
public:
  Reader(std::string_view text, std::string_view file)
      : text_(text), file_(file) {}

  SExpr read_document() {
    skip_space();
    if (pos_ >= text_.size()) {
      throw ParseError(here(), "empty input");
    }
    SExpr e = read();
    skip_space();
    if (pos_ < text_.size()) {
      throw ParseError(here(), "trailing input after top-level expression");
    }
    return e;
  }

private:
  SourceLocation here() const {
    return {std::string(file_), line_, column_};
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') {
          advance();
        }
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip_space();
    if (pos_ >= text_.size()) {
      throw ParseError(here(), "unexpected end of input");
    }
    SExpr e;
    e.loc = here();
    char c = text_[pos_];
    if (c == '(') {
      advance();
      e.is_list = true;
      for (;;) {
        skip_space();
        if (pos_ >= text_.size()) {
          throw ParseError(e.loc, "unbalanced '('");
        }
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        e.items.push_back(read());
      }
      return e;
    }
    if (c == ')') {
      throw ParseError(e.loc, "unexpected ')'");
    }
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (d == '(' || d == ')' || d == ';' ||
          std::isspace(static_cast<unsigned char>(d))) {
        break;
      }
      if (static_cast<unsigned char>(d) < 0x20 || d == '"') {
        throw ParseError(here(), std::string("invalid character '") + d +
                                     "'");
      }
      e.symbol.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(d))));
      advance();
    }
    return e;
  }

  std::string_view text_;
  std::string_view file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

const std::set<std::string, std::less<>> kAcceptedRequirements = {
    ":strips", ":typing", ":action-costs"};

const SExpr &expect_list(const SExpr &e, const char *what) {
  if (!e.is_list) {
    throw ParseError(e.loc, std::string("expected list for ") + what);
  }
  return e;
}

const std::string &expect_symbol(const SExpr &e, const char *what) {
  if (e.is_list || e.symbol.empty()) {
    throw ParseError(e.loc, std::string("expected symbol for ") + what);
  }
  return e.symbol;
}

bool is_variable(std::string_view s) { return !s.empty() && s[0] == '?'; }

// Parses "a b - t c - u d" (d defaults to object).
std::vector<TypedName> parse_typed_list(const std::vector<SExpr> &items,
                                        std::size_t begin) {
  std::vector<TypedName> out;
  std::size_t pending = out.size();
  for (std::size_t i = begin; i < items.size(); ++i) {
    const SExpr &e = items[i];
    if (e.is_list) {
      throw ParseError(e.loc, "unsupported type expression (either?)");
    }
    if (e.symbol == "-") {
      if (i + 1 >= items.size()) {
        throw ParseError(e.loc, "missing type after '-'");
      }
      const std::string &type = expect_symbol(items[i + 1], "type name");
      if (pending == out.size()) {
        throw ParseError(e.loc, "type annotation without names");
      }
      for (std::size_t k = pending; k < out.size(); ++k) {
        out[k].type = type;
      }
      pending = out.size();
      ++i;
      continue;
    }
    out.push_back({e.symbol, "object"});
  }
  return out;
}

Atom parse_atom(const SExpr &e) {
  expect_list(e, "atom");
  if (e.items.empty()) {
    throw ParseError(e.loc, "empty atom");
  }
  Atom a;
  a.predicate = expect_symbol(e.items[0], "predicate name");
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    a.args.push_back(expect_symbol(e.items[i], "atom argument"));
  }
  return a;
}

bool is_cost_expression(const SExpr &e) {
  return e.is_list && !e.items.empty() &&
         (e.items[0].is_symbol("increase") || e.items[0].is_symbol("="));
}

// Flattens a conjunction of atoms. Negation is allowed only when
// `negatives` is supplied (effects).
void parse_conjunction(const SExpr &e, std::vector<Atom> &positives,
                       std::vector<Atom> *negatives, bool allow_costs) {
  expect_list(e, "condition");
  if (e.items.empty()) {
    return; // "()" is the empty conjunction.
  }
  const SExpr &head = e.items[0];
  if (head.is_symbol("and")) {
    for (std::size_t i = 1; i < e.items.size(); ++i) {
      parse_conjunction(e.items[i], positives, negatives, allow_costs);
    }
    return;
  }
  if (head.is_symbol("not")) {
    if (negatives == nullptr) {
      throw ParseError(e.loc, "negative conditions are not supported");
    }
    if (e.items.size() != 2) {
      throw ParseError(e.loc, "'not' takes exactly one atom");
    }
    negatives->push_back(parse_atom(e.items[1]));
    return;
  }
  if (is_cost_expression(e)) {
    if (!allow_costs) {
      throw ParseError(e.loc, "numeric expressions require :action-costs");
    }
    return;
  }
  static const std::set<std::string, std::less<>> unsupported = {
      "or", "imply", "exists", "forall", "when", "either", "decrease",
      "assign"};
  if (!head.is_list && unsupported.count(head.symbol)) {
    throw ParseError(head.loc, "unsupported construct '" + head.symbol + "'");
  }
  positives.push_back(parse_atom(e));
}

const char *section_name(const SExpr &e) {
  if (!e.is_list || e.items.empty() || e.items[0].is_list) {
    throw ParseError(e.loc, "expected a (:section ...) list");
  }
  return e.items[0].symbol.c_str();
}

void check_header(const SExpr &doc, const char *kind, std::string &name) {
  expect_list(doc, "define");
  if (doc.items.size() < 2 || !doc.items[0].is_symbol("define")) {
    throw ParseError(doc.loc, "expected (define ...)");
  }
  const SExpr &hdr = expect_list(doc.items[1], kind);
  if (hdr.items.size() != 2 || !hdr.items[0].is_symbol(kind)) {
    throw ParseError(hdr.loc, std::string("expected (") + kind + " NAME)");
  }
  name = expect_symbol(hdr.items[1], "name");
}

void check_atom_against(const Atom &a, const SourceLocation &loc,
                        const DomainDef &dom) {
  const PredicateDecl *p = dom.find_predicate(a.predicate);
  if (p == nullptr) {
    throw ParseError(loc, "undeclared predicate '" + a.predicate + "'");
  }
  if (p->params.size() != a.args.size()) {
    throw ParseError(loc, "predicate '" + a.predicate + "' expects " +
                              std::to_string(p->params.size()) +
                              " arguments, got " +
                              std::to_string(a.args.size()));
  }
}

std::string join_typed(const std::vector<TypedName> &list) {
  std::string out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (i) {
      out += ' ';
    }
    out += list[i].name + " - " + list[i].type;
  }
  return out;
}

std::string conjunction_text(const std::vector<Atom> &pos,
                             const std::vector<Atom> *neg,
                             const std::string &indent) {
  std::string out = "(and";
  for (const auto &a : pos) {
    out += "\n" + indent + "  " + to_string(a);
  }
  if (neg) {
    for (const auto &a : *neg) {
      out += "\n" + indent + "  (not " + to_string(a) + ")";
    }
  }
  out += ")";
  return out;
}

} // namespace

const PredicateDecl *DomainDef::find_predicate(std::string_view n) const {
  for (const auto &p : predicates) {
    if (p.name == n) {
      return &p;
    }
  }
  return nullptr;
}

const OperatorSchema *DomainDef::find_operator(std::string_view n) const {
  for (const auto &o : operators) {
    if (o.name == n) {
      return &o;
    }
  }
  return nullptr;
}

bool DomainDef::has_type(std::string_view n) const {
  if (n == "object") {
    return true;
  }
  return std::any_of(types.begin(), types.end(),
                     [&](const TypeDecl &t) { return t.name == n; });
}

bool DomainDef::is_subtype(std::string_view type,
                           std::string_view ancestor) const {
  if (ancestor == "object") {
    return true;
  }
  std::string_view cur = type;
  // The type graph is a forest, so this walk terminates within |types|.
  for (std::size_t guard = 0; guard <= types.size(); ++guard) {
    if (cur == ancestor) {
      return true;
    }
    if (cur == "object") {
      return false;
    }
    auto it = std::find_if(types.begin(), types.end(),
                           [&](const TypeDecl &t) { return t.name == cur; });
    if (it == types.end()) {
      return false;
    }
    cur = it->parent;
  }
  return false;
}

const TypedName *ProblemDef::find_object(std::string_view n) const {
  for (const auto &o : objects) {
    if (o.name == n) {
      return &o;
    }
  }
  return nullptr;
}

std::string to_string(const Atom &atom) {
  std::string out = "(" + atom.predicate;
  for (const auto &a : atom.args) {
    out += ' ';
    out += a;
  }
  out += ')';
  return out;
}

DomainDef parse_domain(std::string_view text, std::string_view file) {
  Reader reader(text, file);
  SExpr doc = reader.read_document();
  DomainDef dom;
  check_header(doc, "domain", dom.name);

  bool typing = false;
  bool costs = false;
  // Locations of operator atoms, kept for the static checks below.
  std::vector<std::vector<SourceLocation>> op_locs;

  for (std::size_t i = 2; i < doc.items.size(); ++i) {
    const SExpr &sec = doc.items[i];
    std::string kind = section_name(sec);
    if (kind == ":requirements") {
      for (std::size_t k = 1; k < sec.items.size(); ++k) {
        const std::string &r = expect_symbol(sec.items[k], "requirement");
        if (!kAcceptedRequirements.count(r)) {
          throw ParseError(sec.items[k].loc,
                           "unsupported requirement '" + r + "'");
        }
        typing = typing || r == ":typing";
        costs = costs || r == ":action-costs";
        dom.requirements.push_back(r);
      }
    } else if (kind == ":types") {
      if (!typing) {
        throw ParseError(sec.loc, ":types requires :typing");
      }
      for (auto &t : parse_typed_list(sec.items, 1)) {
        if (t.name == "object") {
          continue;
        }
        if (dom.has_type(t.name)) {
          throw ParseError(sec.loc, "duplicate type '" + t.name + "'");
        }
        dom.types.push_back({t.name, t.type});
      }
    } else if (kind == ":predicates") {
      for (std::size_t k = 1; k < sec.items.size(); ++k) {
        const SExpr &p = expect_list(sec.items[k], "predicate declaration");
        if (p.items.empty()) {
          throw ParseError(p.loc, "empty predicate declaration");
        }
        PredicateDecl decl;
        decl.name = expect_symbol(p.items[0], "predicate name");
        decl.params = parse_typed_list(p.items, 1);
        if (dom.find_predicate(decl.name)) {
          throw ParseError(p.loc, "duplicate predicate '" + decl.name + "'");
        }
        dom.predicates.push_back(std::move(decl));
      }
    } else if (kind == ":functions") {
      if (!costs) {
        throw ParseError(sec.loc, ":functions requires :action-costs");
      }
      // total-cost declarations are accepted and discarded.
    } else if (kind == ":action") {
      OperatorSchema op;
      if (sec.items.size() < 2) {
        throw ParseError(sec.loc, "action without a name");
      }
      op.name = expect_symbol(sec.items[1], "action name");
      std::vector<SourceLocation> locs;
      for (std::size_t k = 2; k < sec.items.size(); ++k) {
        const SExpr &key = sec.items[k];
        if (k + 1 >= sec.items.size()) {
          throw ParseError(key.loc, "missing value for action field");
        }
        const SExpr &val = sec.items[k + 1];
        ++k;
        if (key.is_symbol(":parameters")) {
          op.params = parse_typed_list(expect_list(val, "parameters").items,
                                       0);
        } else if (key.is_symbol(":precondition")) {
          parse_conjunction(val, op.pre, nullptr, costs);
        } else if (key.is_symbol(":effect")) {
          parse_conjunction(val, op.add, &op.del, costs);
        } else {
          throw ParseError(key.loc, "unknown action field");
        }
        locs.push_back(val.loc);
      }
      if (dom.find_operator(op.name)) {
        throw ParseError(sec.loc, "duplicate action '" + op.name + "'");
      }
      dom.operators.push_back(std::move(op));
      op_locs.push_back({sec.loc});
    } else {
      throw ParseError(sec.loc, "unsupported section '" + kind + "'");
    }
  }

  for (const auto &t : dom.types) {
    if (!dom.has_type(t.parent)) {
      throw ParseError(doc.loc, "undeclared type '" + t.parent + "'");
    }
    // Reject cycles: walking parents must reach object.
    std::string cur = t.name;
    for (std::size_t guard = 0;; ++guard) {
      if (cur == "object") {
        break;
      }
      if (guard > dom.types.size()) {
        throw ParseError(doc.loc, "cyclic type hierarchy at '" + t.name + "'");
      }
      auto it = std::find_if(dom.types.begin(), dom.types.end(),
                             [&](const TypeDecl &d) { return d.name == cur; });
      cur = it->parent;
    }
  }
  for (const auto &p : dom.predicates) {
    for (const auto &param : p.params) {
      if (!dom.has_type(param.type)) {
        throw ParseError(doc.loc, "undeclared type '" + param.type +
                                      "' in predicate '" + p.name + "'");
      }
    }
  }
  for (std::size_t o = 0; o < dom.operators.size(); ++o) {
    const auto &op = dom.operators[o];
    const SourceLocation &loc = op_locs[o][0];
    std::set<std::string> names;
    for (const auto &param : op.params) {
      if (!is_variable(param.name)) {
        throw ParseError(loc, "parameter '" + param.name +
                                  "' must start with '?'");
      }
      if (!names.insert(param.name).second) {
        throw ParseError(loc, "duplicate parameter '" + param.name + "'");
      }
      if (!dom.has_type(param.type)) {
        throw ParseError(loc, "undeclared type '" + param.type + "'");
      }
    }
    auto check = [&](const Atom &a) {
      check_atom_against(a, loc, dom);
      const PredicateDecl *p = dom.find_predicate(a.predicate);
      for (std::size_t k = 0; k < a.args.size(); ++k) {
        auto it = std::find_if(op.params.begin(), op.params.end(),
                               [&](const TypedName &t) {
                                 return t.name == a.args[k];
                               });
        if (it == op.params.end()) {
          throw ParseError(loc, "'" + a.args[k] + "' in action '" + op.name +
                                    "' is not a parameter");
        }
        if (!dom.is_subtype(it->type, p->params[k].type)) {
          throw ParseError(loc, "parameter '" + it->name + "' of type '" +
                                    it->type + "' does not fit '" +
                                    p->params[k].type + "' in '" +
                                    a.predicate + "'");
        }
      }
    };
    for (const auto &a : op.pre) {
      check(a);
    }
    for (const auto &a : op.add) {
      check(a);
    }
    for (const auto &a : op.del) {
      check(a);
    }
  }
  return dom;
}

ProblemDef parse_problem(std::string_view text, const DomainDef &dom,
                         std::string_view file) {
  Reader reader(text, file);
  SExpr doc = reader.read_document();
  ProblemDef prob;
  check_header(doc, "problem", prob.name);
  const bool costs =
      std::find(dom.requirements.begin(), dom.requirements.end(),
                ":action-costs") != dom.requirements.end();

  std::vector<SourceLocation> init_locs;
  std::vector<SourceLocation> goal_locs;
  for (std::size_t i = 2; i < doc.items.size(); ++i) {
    const SExpr &sec = doc.items[i];
    std::string kind = section_name(sec);
    if (kind == ":domain") {
      if (sec.items.size() != 2) {
        throw ParseError(sec.loc, "expected (:domain NAME)");
      }
      prob.domain_name = expect_symbol(sec.items[1], "domain name");
      if (prob.domain_name != dom.name) {
        throw ParseError(sec.items[1].loc,
                         "problem is for domain '" + prob.domain_name +
                             "', not '" + dom.name + "'");
      }
    } else if (kind == ":objects") {
      for (auto &o : parse_typed_list(sec.items, 1)) {
        if (!dom.has_type(o.type)) {
          throw ParseError(sec.loc, "object '" + o.name +
                                        "' has unknown type '" + o.type + "'");
        }
        if (prob.find_object(o.name)) {
          throw ParseError(sec.loc, "duplicate object '" + o.name + "'");
        }
        prob.objects.push_back(std::move(o));
      }
    } else if (kind == ":init") {
      for (std::size_t k = 1; k < sec.items.size(); ++k) {
        const SExpr &e = sec.items[k];
        if (is_cost_expression(e)) {
          if (!costs) {
            throw ParseError(e.loc, "numeric fluents require :action-costs");
          }
          continue;
        }
        prob.init.push_back(parse_atom(e));
        init_locs.push_back(e.loc);
      }
    } else if (kind == ":goal") {
      if (sec.items.size() != 2) {
        throw ParseError(sec.loc, "expected (:goal CONDITION)");
      }
      parse_conjunction(sec.items[1], prob.goal, nullptr, false);
      goal_locs.resize(prob.goal.size(), sec.items[1].loc);
    } else if (kind == ":metric") {
      if (!costs) {
        throw ParseError(sec.loc, ":metric requires :action-costs");
      }
    } else if (kind == ":requirements") {
      // Tolerated; the domain's requirements govern.
    } else {
      throw ParseError(sec.loc, "unsupported section '" + kind + "'");
    }
  }

  auto check = [&](const Atom &a, const SourceLocation &loc) {
    check_atom_against(a, loc, dom);
    const PredicateDecl *p = dom.find_predicate(a.predicate);
    for (std::size_t k = 0; k < a.args.size(); ++k) {
      const TypedName *obj = prob.find_object(a.args[k]);
      if (obj == nullptr) {
        throw ParseError(loc, "unknown object '" + a.args[k] + "' in " +
                                  to_string(a));
      }
      if (!dom.is_subtype(obj->type, p->params[k].type)) {
        throw ParseError(loc, "object '" + obj->name + "' of type '" +
                                  obj->type + "' does not fit '" +
                                  p->params[k].type + "' in " + to_string(a));
      }
    }
  };
  for (std::size_t k = 0; k < prob.init.size(); ++k) {
    check(prob.init[k], init_locs[k]);
  }
  for (std::size_t k = 0; k < prob.goal.size(); ++k) {
    check(prob.goal[k], goal_locs[k]);
  }
  return prob;
}

std::string to_pddl(const DomainDef &dom) {
  std::ostringstream out;
  out << "(define (domain " << dom.name << ")\n";
  if (!dom.requirements.empty()) {
    out << "  (:requirements";
    for (const auto &r : dom.requirements) {
      out << ' ' << r;
    }
    out << ")\n";
  }
  if (!dom.types.empty()) {
    out << "  (:types";
    for (const auto &t : dom.types) {
      out << "\n    " << t.name << " - " << t.parent;
    }
    out << ")\n";
  }
  out << "  (:predicates";
  for (const auto &p : dom.predicates) {
    out << "\n    (" << p.name;
    if (!p.params.empty()) {
      out << ' ' << join_typed(p.params);
    }
    out << ')';
  }
  out << ")\n";
  for (const auto &op : dom.operators) {
    out << "  (:action " << op.name << "\n";
    out << "    :parameters (" << join_typed(op.params) << ")\n";
    out << "    :precondition " << conjunction_text(op.pre, nullptr, "    ")
        << "\n";
    out << "    :effect " << conjunction_text(op.add, &op.del, "    ")
        << ")\n";
  }
  out << ")\n";
  return out.str();
}

std::string to_pddl(const ProblemDef &prob) {
  std::ostringstream out;
  out << "(define (problem " << prob.name << ")\n";
  out << "  (:domain " << prob.domain_name << ")\n";
  out << "  (:objects";
  for (const auto &o : prob.objects) {
    out << "\n    " << o.name << " - " << o.type;
  }
  out << ")\n  (:init";
  for (const auto &a : prob.init) {
    out << "\n    " << to_string(a);
  }
  out << ")\n  (:goal " << conjunction_text(prob.goal, nullptr, "  ")
      << "))\n";
  return out.str();
}

ProblemDef canonical(ProblemDef prob) {
  std::sort(prob.objects.begin(), prob.objects.end(),
            [](const TypedName &a, const TypedName &b) {
              return std::tie(a.type, a.name) < std::tie(b.type, b.name);
            });
  for (auto *list : {&prob.init, &prob.goal}) {
    std::sort(list->begin(), list->end());
    list->erase(std::unique(list->begin(), list->end()), list->end());
  }
  return prob;
}

// ---------------------------------------------------------------------------
// Grounding

namespace {

std::string key_of(std::string_view head, std::span<const std::string> args) {
  std::string k(head);
  for (const auto &a : args) {
    k += ' ';
    k += a;
  }
  return k;
}

struct LiftedRef {
  std::uint32_t predicate;
  std::vector<std::uint32_t> param_slots;
};

// Mixed-radix layout of one predicate's atoms over its typed tuples.
struct PredicateLayout {
  AtomId base = 0;
  std::vector<std::string> param_types;
  std::vector<const std::vector<int> *> positions;
  std::vector<std::size_t> strides;
  std::size_t count = 1;
};

} // namespace

std::string GroundedTask::atom_name(AtomId id) const {
  const GroundAtom &a = atoms.at(id);
  std::string out = "(" + predicates[a.predicate];
  for (auto o : a.args) {
    out += ' ';
    out += objects[o];
  }
  return out + ")";
}

std::string GroundedTask::action_name(ActionId id) const {
  const GroundAction &a = actions.at(id);
  std::string out = "(" + operators[a.schema];
  for (auto o : a.args) {
    out += ' ';
    out += objects[o];
  }
  return out + ")";
}

std::optional<AtomId>
GroundedTask::find_atom(std::string_view predicate,
                        std::span<const std::string> args) const {
  auto it = atom_index.find(key_of(predicate, args));
  if (it == atom_index.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<ActionId>
GroundedTask::find_action(std::string_view op,
                          std::span<const std::string> args) const {
  auto sit = std::find(operators.begin(), operators.end(), op);
  if (sit == operators.end()) {
    return std::nullopt;
  }
  const auto schema = static_cast<std::uint32_t>(sit - operators.begin());
  std::vector<ObjectId> ids;
  for (const auto &a : args) {
    auto oit = std::lower_bound(objects.begin(), objects.end(), a);
    if (oit == objects.end() || *oit != a) {
      return std::nullopt;
    }
    ids.push_back(static_cast<ObjectId>(oit - objects.begin()));
  }
  auto it = std::lower_bound(
      actions.begin(), actions.end(), std::make_pair(schema, &ids),
      [](const GroundAction &x, const auto &key) {
        if (x.schema != key.first) {
          return x.schema < key.first;
        }
        return x.args < *key.second;
      });
  if (it == actions.end() || it->schema != schema || it->args != ids) {
    return std::nullopt;
  }
  return it->id;
}

std::optional<ActionId> GroundedTask::find_action(std::string_view text) const {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }
  if (words.empty()) {
    return std::nullopt;
  }
  return find_action(words[0], std::span(words).subspan(1));
}

std::size_t GroundedTask::max_action_size() const {
  std::size_t m = 0;
  for (const auto &a : actions) {
    m = std::max(m, a.pre.size() + a.add.size() + a.del.size());
  }
  return m;
}

bool GroundedTask::operator==(const GroundedTask &o) const {
  return domain_name == o.domain_name && problem_name == o.problem_name &&
         objects == o.objects && object_types == o.object_types &&
         objects_by_type == o.objects_by_type && predicates == o.predicates &&
         operators == o.operators && atoms == o.atoms &&
         actions == o.actions && init == o.init && goal == o.goal;
}

GroundedTask ground(const DomainDef &dom, const ProblemDef &prob,
                    const GroundingLimits &limits) {
  GroundedTask task;
  task.domain_name = dom.name;
  task.problem_name = prob.name;

  std::vector<TypedName> objs = prob.objects;
  std::sort(objs.begin(), objs.end(),
            [](const TypedName &a, const TypedName &b) {
              return a.name < b.name;
            });
  for (const auto &o : objs) {
    task.objects.push_back(o.name);
    task.object_types.push_back(o.type);
  }
  std::vector<std::string> type_names = {"object"};
  for (const auto &t : dom.types) {
    type_names.push_back(t.name);
  }
  // position_in_type[type][object] = index within objects_by_type[type].
  std::map<std::string, std::vector<int>> position_in_type;
  for (const auto &t : type_names) {
    auto &list = task.objects_by_type[t];
    auto &pos = position_in_type[t];
    pos.assign(objs.size(), -1);
    for (ObjectId i = 0; i < objs.size(); ++i) {
      if (dom.is_subtype(objs[i].type, t)) {
        pos[i] = static_cast<int>(list.size());
        list.push_back(i);
      }
    }
  }

  std::vector<const PredicateDecl *> preds;
  for (const auto &p : dom.predicates) {
    preds.push_back(&p);
  }
  std::sort(preds.begin(), preds.end(),
            [](auto *a, auto *b) { return a->name < b->name; });
  std::map<std::string, std::uint32_t, std::less<>> pred_index;
  std::vector<PredicateLayout> layouts;
  std::size_t total_atoms = 0;
  for (std::uint32_t i = 0; i < preds.size(); ++i) {
    task.predicates.push_back(preds[i]->name);
    pred_index[preds[i]->name] = i;
    PredicateLayout lay;
    lay.base = static_cast<AtomId>(total_atoms);
    for (const auto &param : preds[i]->params) {
      lay.param_types.push_back(param.type);
      lay.positions.push_back(&position_in_type.at(param.type));
    }
    lay.strides.assign(lay.param_types.size(), 1);
    for (std::size_t k = lay.param_types.size(); k-- > 0;) {
      lay.strides[k] = lay.count;
      lay.count *= task.objects_by_type[lay.param_types[k]].size();
      if (lay.count > limits.max_atoms) {
        throw GroundingError("grounding exceeds atom budget of " +
                             std::to_string(limits.max_atoms));
      }
    }
    total_atoms += lay.count;
    if (total_atoms > limits.max_atoms) {
      throw GroundingError("grounding exceeds atom budget of " +
                           std::to_string(limits.max_atoms));
    }
    layouts.push_back(std::move(lay));
  }

  task.atoms.reserve(total_atoms);
  for (std::uint32_t p = 0; p < layouts.size(); ++p) {
    const auto &lay = layouts[p];
    std::vector<std::size_t> idx(lay.param_types.size(), 0);
    for (std::size_t n = 0; n < lay.count; ++n) {
      GroundAtom ga;
      ga.predicate = p;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        ga.args.push_back(task.objects_by_type[lay.param_types[k]][idx[k]]);
      }
      task.atoms.push_back(std::move(ga));
      for (std::size_t k = idx.size(); k-- > 0;) {
        if (++idx[k] < task.objects_by_type[lay.param_types[k]].size()) {
          break;
        }
        idx[k] = 0;
      }
    }
  }
  for (AtomId a = 0; a < task.atoms.size(); ++a) {
    std::vector<std::string> names;
    for (auto o : task.atoms[a].args) {
      names.push_back(task.objects[o]);
    }
    task.atom_index.emplace(key_of(task.predicates[task.atoms[a].predicate],
                                   names),
                            a);
  }

  auto atom_of = [&](std::uint32_t p, std::span<const ObjectId> args) {
    const auto &lay = layouts[p];
    std::size_t id = lay.base;
    for (std::size_t k = 0; k < args.size(); ++k) {
      int pos = (*lay.positions[k])[args[k]];
      id += static_cast<std::size_t>(pos) * lay.strides[k];
    }
    return static_cast<AtomId>(id);
  };

  std::vector<const OperatorSchema *> ops;
  for (const auto &o : dom.operators) {
    ops.push_back(&o);
  }
  std::sort(ops.begin(), ops.end(),
            [](auto *a, auto *b) { return a->name < b->name; });

  // Predicates no operator changes keep their initial truth value.
  std::vector<char> is_static(preds.size(), 1);
  for (const auto &o : dom.operators) {
    for (const auto *eff : {&o.add, &o.del}) {
      for (const auto &a : *eff) {
        is_static[pred_index.at(a.predicate)] = 0;
      }
    }
  }
  State init_state(total_atoms);
  for (const auto &a : prob.init) {
    auto id = task.find_atom(a.predicate, a.args);
    if (!id) {
      throw GroundingError("atom " + to_string(a) + " is not in the universe");
    }
    init_state.set(*id);
  }

  if (!limits.prune_static) {
    std::size_t total_actions = 0;
    for (auto *op : ops) {
      std::size_t n = 1;
      for (const auto &param : op->params) {
        n *= task.objects_by_type[param.type].size();
        if (n > limits.max_actions) {
          break;
        }
      }
      total_actions += n;
      if (total_actions > limits.max_actions) {
        throw GroundingError("grounding exceeds action budget of " +
                             std::to_string(limits.max_actions));
      }
    }
  }

  for (std::uint32_t s = 0; s < ops.size(); ++s) {
    const OperatorSchema &op = *ops[s];
    task.operators.push_back(op.name);
    auto lift = [&](const std::vector<Atom> &atoms) {
      std::vector<LiftedRef> out;
      for (const auto &a : atoms) {
        LiftedRef r{pred_index.at(a.predicate), {}};
        for (const auto &arg : a.args) {
          for (std::uint32_t k = 0; k < op.params.size(); ++k) {
            if (op.params[k].name == arg) {
              r.param_slots.push_back(k);
              break;
            }
          }
        }
        out.push_back(std::move(r));
      }
      return out;
    };
    const auto pre = lift(op.pre);
    const auto add = lift(op.add);
    const auto del = lift(op.del);

    std::vector<const std::vector<ObjectId> *> domains;
    bool empty = false;
    for (const auto &param : op.params) {
      domains.push_back(&task.objects_by_type[param.type]);
      empty = empty || domains.back()->empty();
    }
    if (empty) {
      continue;
    }
    // Static preconditions grouped by the last parameter they mention, so
    // they can be checked as soon as that parameter is bound.
    std::vector<std::vector<const LiftedRef *>> checks(domains.size() + 1);
    if (limits.prune_static) {
      for (const auto &r : pre) {
        if (!is_static[r.predicate]) {
          continue;
        }
        std::size_t last = 0;
        for (auto slot : r.param_slots) {
          last = std::max<std::size_t>(last, slot + 1);
        }
        checks[last].push_back(&r);
      }
    }
    std::vector<ObjectId> args(domains.size());
    std::vector<ObjectId> atom_args;
    auto instantiate = [&](const std::vector<LiftedRef> &refs) {
      std::vector<AtomId> out;
      out.reserve(refs.size());
      for (const auto &r : refs) {
        atom_args.clear();
        for (auto slot : r.param_slots) {
          atom_args.push_back(args[slot]);
        }
        out.push_back(atom_of(r.predicate, atom_args));
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    };
    auto holds = [&](std::size_t depth) {
      for (const auto *r : checks[depth]) {
        atom_args.clear();
        for (auto slot : r->param_slots) {
          atom_args.push_back(args[slot]);
        }
        if (!init_state.test(atom_of(r->predicate, atom_args))) {
          return false;
        }
      }
      return true;
    };
    std::vector<AtomId> both;
    std::function<void(std::size_t)> bind = [&](std::size_t depth) {
      if (!holds(depth)) {
        return;
      }
      if (depth == domains.size()) {
        GroundAction ga;
        ga.schema = s;
        ga.args = args;
        ga.add = instantiate(add);
        ga.del = instantiate(del);
        both.clear();
        std::set_intersection(ga.add.begin(), ga.add.end(), ga.del.begin(),
                              ga.del.end(), std::back_inserter(both));
        if (!both.empty()) {
          return;
        }
        ga.pre = instantiate(pre);
        if (task.actions.size() >= limits.max_actions) {
          throw GroundingError("grounding exceeds action budget of " +
                               std::to_string(limits.max_actions));
        }
        ga.id = static_cast<ActionId>(task.actions.size());
        task.actions.push_back(std::move(ga));
        return;
      }
      for (ObjectId o : *domains[depth]) {
        args[depth] = o;
        bind(depth + 1);
      }
    };
    bind(0);
  }

  auto ground_atom = [&](const Atom &a) {
    auto id = task.find_atom(a.predicate, a.args);
    if (!id) {
      throw GroundingError("atom " + to_string(a) + " is not in the universe");
    }
    return *id;
  };
  task.init = State(task.atoms.size());
  task.goal = State(task.atoms.size());
  for (const auto &a : prob.init) {
    task.init.set(ground_atom(a));
  }
  for (const auto &a : prob.goal) {
    task.goal.set(ground_atom(a));
  }
  return task;
}

} // namespace plangen::pddl
