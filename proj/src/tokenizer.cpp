#include "plangen/tokenizer.hpp"

#include "plangen/dataset.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>
#include <sstream>

namespace plangen::tokenizer {

using nlohmann::json;

const char *const kSpecialNames[kNumSpecials] = {
    "[pad]",  "[startofproblem]", "[objects]", "[init]",
    "[goal]", "[startofplan]",    "[endofplan]"};

namespace {

const char *kind_name(TokenKind k) {
  switch (k) {
  case TokenKind::special:
    return "special";
  case TokenKind::predicate:
    return "predicate";
  case TokenKind::op:
    return "operator";
  case TokenKind::type:
    return "type";
  case TokenKind::object:
    return "object";
  }
  return "?";
}

TokenKind kind_from(const std::string &s) {
  for (auto k : {TokenKind::special, TokenKind::predicate, TokenKind::op,
                 TokenKind::type, TokenKind::object}) {
    if (s == kind_name(k)) {
      return k;
    }
  }
  throw Error("unknown token kind '" + s + "'");
}

} // namespace

void Vocabulary::add(std::string token, TokenKind kind) {
  tokens_.push_back(std::move(token));
  kinds_.push_back(kind);
}

void Vocabulary::reindex() {
  index_.clear();
  object_type_.clear();
  for (TokenId i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw Error("duplicate token '" + tokens_[i] + "'");
    }
  }
  for (const auto &[type, k] : limits_) {
    for (int i = 1; i <= k; ++i) {
      object_type_[index_.at(type + "-" + std::to_string(i))] = type;
    }
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  if (auto t = find(token)) {
    return *t;
  }
  throw LimitError("token '" + std::string(token) +
                   "' is not in the vocabulary");
}

std::optional<std::size_t> Vocabulary::arity(TokenId id) const {
  auto it = arity_.find(id);
  if (it == arity_.end()) {
    return std::nullopt;
  }
  return it->second;
}

const std::string &Vocabulary::object_type(TokenId id) const {
  return object_type_.at(id);
}

std::string Vocabulary::to_json() const {
  json j;
  j["domain"] = domain_;
  j["tokens"] = tokens_;
  json kinds = json::array();
  for (auto k : kinds_) {
    kinds.push_back(kind_name(k));
  }
  j["kinds"] = kinds;
  json specials = json::object();
  for (TokenId i = 0; i < kNumSpecials; ++i) {
    specials[kSpecialNames[i]] = i;
  }
  j["specials"] = specials;
  j["limits"] = limits_;
  json arity = json::object();
  for (const auto &[id, n] : arity_) {
    arity[tokens_[id]] = n;
  }
  j["arity"] = arity;
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string &text) {
  Vocabulary v;
  try {
    auto j = json::parse(text);
    v.domain_ = j.at("domain").get<std::string>();
    v.tokens_ = j.at("tokens").get<std::vector<std::string>>();
    for (const auto &k : j.at("kinds")) {
      v.kinds_.push_back(kind_from(k.get<std::string>()));
    }
    v.limits_ = j.at("limits").get<std::map<std::string, int>>();
    if (v.kinds_.size() != v.tokens_.size()) {
      throw Error("vocabulary kinds and tokens differ in length");
    }
    v.reindex();
    for (const auto &[name, n] : j.at("arity").items()) {
      v.arity_[v.index_.at(name)] = n.get<std::size_t>();
    }
  } catch (const json::exception &e) {
    throw Error(std::string("invalid vocabulary: ") + e.what());
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path &path) const {
  write_file_atomic(path, to_json() + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path &path) {
  return from_json(read_file(path));
}

std::uint64_t Vocabulary::hash() const { return fnv1a(to_json()); }

Vocabulary build_vocab(const pddl::DomainDef &dom,
                       const std::map<std::string, int> &limits) {
  Vocabulary v;
  v.domain_ = dom.name;
  for (TokenId i = 0; i < kNumSpecials; ++i) {
    v.add(kSpecialNames[i], TokenKind::special);
  }
  std::vector<std::string> preds, ops, types;
  for (const auto &p : dom.predicates) {
    preds.push_back(p.name);
  }
  for (const auto &o : dom.operators) {
    ops.push_back(o.name);
  }
  for (const auto &t : dom.types) {
    if (t.name != "object") {
      types.push_back(t.name);
    }
  }
  std::sort(preds.begin(), preds.end());
  std::sort(ops.begin(), ops.end());
  std::sort(types.begin(), types.end());
  for (auto &p : preds) {
    v.add(p, TokenKind::predicate);
  }
  for (auto &o : ops) {
    v.arity_[static_cast<TokenId>(v.tokens_.size())] =
        dom.find_operator(o)->params.size();
    v.add(o, TokenKind::op);
  }
  for (auto &t : types) {
    v.add(t, TokenKind::type);
  }
  for (const auto &[type, k] : limits) {
    if (type != "object" && !dom.has_type(type)) {
      throw UsageError("limit for unknown type '" + type + "'");
    }
    if (k < 0) {
      throw UsageError("negative object limit for '" + type + "'");
    }
    for (int i = 1; i <= k; ++i) {
      v.add(type + "-" + std::to_string(i), TokenKind::object);
    }
  }
  v.limits_ = limits;
  v.reindex();
  return v;
}

pddl::ProblemDef normalize_objects(const pddl::ProblemDef &prob) {
  std::map<std::string, std::vector<std::string>> by_type;
  for (const auto &o : prob.objects) {
    by_type[o.type].push_back(o.name);
  }
  std::map<std::string, std::string> rename;
  for (auto &[type, names] : by_type) {
    std::sort(names.begin(), names.end());
    for (std::size_t i = 0; i < names.size(); ++i) {
      rename[names[i]] = type + "-" + std::to_string(i + 1);
    }
  }
  pddl::ProblemDef out = prob;
  for (auto &o : out.objects) {
    o.name = rename.at(o.name);
  }
  for (auto *atoms : {&out.init, &out.goal}) {
    for (auto &a : *atoms) {
      for (auto &x : a.args) {
        x = rename.at(x);
      }
    }
  }
  return pddl::canonical(std::move(out));
}

namespace {

TokenId object_token(const Vocabulary &v, const std::string &name) {
  auto t = v.find(name);
  if (!t || v.kind(*t) != TokenKind::object) {
    throw LimitError("object '" + name +
                     "' has no token (beyond the per-type limit or not in "
                     "canonical <type>-<k> form)");
  }
  return *t;
}

void encode_atoms(const std::vector<pddl::Atom> &atoms, const Vocabulary &v,
                  std::vector<TokenId> &out) {
  for (const auto &a : atoms) {
    out.push_back(v.id(a.predicate));
    for (const auto &x : a.args) {
      out.push_back(object_token(v, x));
    }
  }
}

} // namespace

TokenSeq encode_problem(const pddl::ProblemDef &prob, const Vocabulary &v) {
  auto p = pddl::canonical(prob);
  TokenSeq seq;
  auto &ids = seq.ids;
  ids.push_back(kStartOfProblem);
  ids.push_back(kObjects);
  for (const auto &o : p.objects) {
    TokenId obj = object_token(v, o.name);
    if (v.object_type(obj) != o.type) {
      throw LimitError("object '" + o.name + "' declared with type '" +
                       o.type + "'");
    }
    ids.push_back(v.id(o.type));
    ids.push_back(obj);
  }
  ids.push_back(kInit);
  encode_atoms(p.init, v, ids);
  ids.push_back(kGoal);
  encode_atoms(p.goal, v, ids);
  ids.push_back(kStartOfPlan);
  seq.boundary = ids.size();
  return seq;
}

pddl::ProblemDef decode_problem(std::span<const TokenId> ids,
                                const Vocabulary &v,
                                const pddl::DomainDef &dom) {
  std::size_t i = 0;
  auto expect = [&](TokenId t) {
    if (i >= ids.size() || ids[i] != t) {
      throw DecodeError(std::string("expected ") + kSpecialNames[t] +
                        " at position " + std::to_string(i));
    }
    ++i;
  };
  auto check_id = [&](std::size_t k) {
    if (k >= ids.size()) {
      throw DecodeError("unexpected end of problem tokens");
    }
    if (ids[k] >= v.size()) {
      throw DecodeError("token id out of range");
    }
    return ids[k];
  };
  pddl::ProblemDef p;
  p.domain_name = dom.name;
  expect(kStartOfProblem);
  expect(kObjects);
  while (check_id(i) != kInit) {
    TokenId type = ids[i];
    TokenId obj = check_id(i + 1);
    if (v.kind(type) != TokenKind::type || v.kind(obj) != TokenKind::object ||
        v.object_type(obj) != v.name(type)) {
      throw DecodeError("bad object declaration at position " +
                        std::to_string(i));
    }
    p.objects.push_back({v.name(obj), v.name(type)});
    i += 2;
  }
  auto atoms = [&](TokenId stop, std::vector<pddl::Atom> &out) {
    while (check_id(i) != stop) {
      TokenId pred = ids[i];
      if (v.kind(pred) != TokenKind::predicate) {
        throw DecodeError("expected a predicate at position " +
                          std::to_string(i));
      }
      const auto *decl = dom.find_predicate(v.name(pred));
      pddl::Atom a{v.name(pred), {}};
      ++i;
      for (std::size_t k = 0; k < decl->params.size(); ++k, ++i) {
        TokenId x = check_id(i);
        if (v.kind(x) != TokenKind::object) {
          throw DecodeError("expected an object at position " +
                            std::to_string(i));
        }
        a.args.push_back(v.name(x));
      }
      out.push_back(std::move(a));
    }
  };
  expect(kInit);
  atoms(kGoal, p.init);
  expect(kGoal);
  atoms(kStartOfPlan, p.goal);
  expect(kStartOfPlan);
  return p;
}

std::vector<TokenId> encode_action(const ActionCall &a, const Vocabulary &v) {
  std::vector<TokenId> out;
  TokenId op = v.id(a.op);
  if (v.kind(op) != TokenKind::op) {
    throw LimitError("'" + a.op + "' is not an operator");
  }
  if (*v.arity(op) != a.args.size()) {
    throw LimitError("operator '" + a.op + "' expects " +
                     std::to_string(*v.arity(op)) + " arguments");
  }
  out.push_back(op);
  for (const auto &x : a.args) {
    out.push_back(object_token(v, x));
  }
  return out;
}

ActionCall decode_action(std::span<const TokenId> span, const Vocabulary &v) {
  if (span.empty() || span[0] >= v.size() ||
      v.kind(span[0]) != TokenKind::op) {
    throw DecodeError("action must start with an operator token");
  }
  if (*v.arity(span[0]) + 1 != span.size()) {
    throw DecodeError("operator '" + v.name(span[0]) + "' expects " +
                      std::to_string(*v.arity(span[0])) + " arguments");
  }
  ActionCall a{v.name(span[0]), {}};
  for (std::size_t i = 1; i < span.size(); ++i) {
    if (span[i] >= v.size() || v.kind(span[i]) != TokenKind::object) {
      throw DecodeError("non-object token in argument position");
    }
    a.args.push_back(v.name(span[i]));
  }
  return a;
}

ActionCall action_call(const pddl::GroundedTask &task, ActionId a) {
  const auto &ga = task.actions.at(a);
  ActionCall c{task.operators[ga.schema], {}};
  for (auto o : ga.args) {
    c.args.push_back(task.objects[o]);
  }
  return c;
}

std::optional<ActionCall> parse_action_call(std::string_view text) {
  std::string s(text);
  for (char &c : s) {
    if (c == '(' || c == ')') {
      c = ' ';
    }
  }
  std::istringstream in(s);
  ActionCall a;
  if (!(in >> a.op)) {
    return std::nullopt;
  }
  for (std::string w; in >> w;) {
    a.args.push_back(w);
  }
  return a;
}

std::vector<TokenId> encode_plan(const std::vector<ActionCall> &plan,
                                 const Vocabulary &v) {
  std::vector<TokenId> out;
  for (const auto &a : plan) {
    auto t = encode_action(a, v);
    out.insert(out.end(), t.begin(), t.end());
  }
  out.push_back(kEndOfPlan);
  return out;
}

std::vector<TokenId> encode_plan(const pddl::GroundedTask &task,
                                 const world::Plan &plan,
                                 const Vocabulary &v) {
  std::vector<ActionCall> calls;
  for (auto a : plan.actions) {
    calls.push_back(action_call(task, a));
  }
  return encode_plan(calls, v);
}

std::string to_string(DecodeStatus s) {
  switch (s) {
  case DecodeStatus::ok:
    return "ok";
  case DecodeStatus::malformed:
    return "malformed";
  case DecodeStatus::truncated:
    return "truncated";
  }
  return "?";
}

DecodedPlan decode_plan(std::span<const TokenId> tail, const Vocabulary &v) {
  DecodedPlan out;
  std::size_t i = 0;
  while (true) {
    if (i >= tail.size()) {
      out.status = DecodeStatus::truncated;
      return out;
    }
    TokenId t = tail[i];
    if (t == kEndOfPlan) {
      if (i + 1 != tail.size()) {
        out.status = DecodeStatus::malformed;
      }
      return out;
    }
    if (t >= v.size() || v.kind(t) != TokenKind::op) {
      out.status = DecodeStatus::malformed;
      return out;
    }
    std::size_t n = *v.arity(t) + 1;
    if (i + n > tail.size()) {
      bool objects_so_far = true;
      for (std::size_t k = i + 1; k < tail.size(); ++k) {
        objects_so_far = objects_so_far && tail[k] < v.size() &&
                         v.kind(tail[k]) == TokenKind::object;
      }
      out.status =
          objects_so_far ? DecodeStatus::truncated : DecodeStatus::malformed;
      return out;
    }
    try {
      out.actions.push_back(decode_action(tail.subspan(i, n), v));
    } catch (const DecodeError &) {
      out.status = DecodeStatus::malformed;
      return out;
    }
    i += n;
  }
}

std::optional<world::Plan> resolve(const std::vector<ActionCall> &calls,
                                   const pddl::GroundedTask &task) {
  world::Plan plan;
  plan.problem_id = task.problem_name;
  for (const auto &c : calls) {
    auto a = task.find_action(c.op, c.args);
    if (!a) {
      return std::nullopt;
    }
    plan.actions.push_back(*a);
  }
  return plan;
}

TokenSeq encode_example(const pddl::ProblemDef &prob,
                        const std::vector<std::string> &plan,
                        const Vocabulary &v) {
  TokenSeq seq = encode_problem(prob, v);
  std::vector<ActionCall> calls;
  for (const auto &line : plan) {
    auto c = parse_action_call(line);
    if (!c) {
      throw DecodeError("empty action in plan");
    }
    calls.push_back(std::move(*c));
  }
  auto tail = encode_plan(calls, v);
  seq.ids.insert(seq.ids.end(), tail.begin(), tail.end());
  return seq;
}

} // namespace plangen::tokenizer
