#pragma once

#include "plangen/pddl.hpp"
#include "plangen/world.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace plangen::tokenizer {

using TokenId = std::uint32_t;

enum Special : TokenId {
  kPad = 0,
  kStartOfProblem,
  kObjects,
  kInit,
  kGoal,
  kStartOfPlan,
  kEndOfPlan,
  kNumSpecials
};

extern const char *const kSpecialNames[kNumSpecials];

enum class TokenKind { special, predicate, op, type, object };

class LimitError : public Error {
public:
  using Error::Error;
};

class DecodeError : public Error {
public:
  using Error::Error;
};

class Vocabulary {
public:
  Vocabulary() = default;

  std::size_t size() const { return tokens_.size(); }
  const std::string &name(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;
  /// Throws LimitError for unknown tokens.
  TokenId id(std::string_view token) const;
  TokenKind kind(TokenId id) const { return kinds_.at(id); }

  const std::vector<std::string> &tokens() const { return tokens_; }
  const std::map<std::string, int> &limits() const { return limits_; }
  const std::string &domain_name() const { return domain_; }

  /// Arity of an operator token (by schema), or nullopt.
  std::optional<std::size_t> arity(TokenId id) const;
  /// Declared type of an object token.
  const std::string &object_type(TokenId id) const;

  std::string to_json() const;
  static Vocabulary from_json(const std::string &text);
  void save(const std::filesystem::path &path) const;
  static Vocabulary load(const std::filesystem::path &path);
  std::uint64_t hash() const;

  bool operator==(const Vocabulary &o) const {
    return tokens_ == o.tokens_ && kinds_ == o.kinds_ && limits_ == o.limits_;
  }

private:
  friend Vocabulary build_vocab(const pddl::DomainDef &,
                                const std::map<std::string, int> &);
  void add(std::string token, TokenKind kind);
  void reindex();

  std::string domain_;
  std::vector<std::string> tokens_;
  std::vector<TokenKind> kinds_;
  std::map<std::string, int> limits_;
  std::unordered_map<std::string, TokenId> index_;
  std::map<TokenId, std::size_t> arity_;
  std::map<TokenId, std::string> object_type_;
};

/// Specials, then predicates, operators, types (each sorted by name; the
/// implicit root type `object` is not a token), then `<type>-1 .. <type>-k`
/// for every limit entry in type-name order.
Vocabulary build_vocab(const pddl::DomainDef &dom,
                       const std::map<std::string, int> &limits);

/// Renames the objects of each type to `<type>-1 ..` in name order.
pddl::ProblemDef normalize_objects(const pddl::ProblemDef &prob);

struct TokenSeq {
  std::vector<TokenId> ids;
  /// Index of the first token after [startofplan].
  std::size_t boundary = 0;
};

/// [startofproblem] [objects] (type obj)* [init] (pred args)* [goal]
/// (pred args)* [startofplan], in canonical atom order.
TokenSeq encode_problem(const pddl::ProblemDef &prob, const Vocabulary &v);

/// Inverse of encode_problem on the prefix up to [startofplan].
pddl::ProblemDef decode_problem(std::span<const TokenId> ids,
                                const Vocabulary &v,
                                const pddl::DomainDef &dom);

/// Action call in surface form, resolved against a task separately.
struct ActionCall {
  std::string op;
  std::vector<std::string> args;
  bool operator==(const ActionCall &) const = default;
};

std::vector<TokenId> encode_action(const ActionCall &a, const Vocabulary &v);
/// Decodes exactly one action spanning all of `span`. Throws DecodeError on
/// wrong arity or a non-object argument token.
ActionCall decode_action(std::span<const TokenId> span, const Vocabulary &v);

ActionCall action_call(const pddl::GroundedTask &task, ActionId a);
std::optional<ActionCall> parse_action_call(std::string_view text);

/// Plan actions followed by [endofplan].
std::vector<TokenId> encode_plan(const std::vector<ActionCall> &plan,
                                 const Vocabulary &v);
std::vector<TokenId> encode_plan(const pddl::GroundedTask &task,
                                 const world::Plan &plan, const Vocabulary &v);

enum class DecodeStatus { ok, malformed, truncated };
std::string to_string(DecodeStatus s);

struct DecodedPlan {
  std::vector<ActionCall> actions;
  DecodeStatus status = DecodeStatus::ok;
  bool ok() const { return status == DecodeStatus::ok; }
};

/// Segments the tokens after [startofplan] greedily by operator arity and
/// stops at [endofplan]. Running out of tokens is `truncated`; any other
/// irregularity is `malformed`.
DecodedPlan decode_plan(std::span<const TokenId> tail, const Vocabulary &v);

/// Maps surface actions onto task action ids; nullopt when some call is
/// not a grounded action of the task (e.g. ill-typed arguments).
std::optional<world::Plan> resolve(const std::vector<ActionCall> &calls,
                                   const pddl::GroundedTask &task);

/// Full training sequence: problem prefix, plan tokens, [endofplan].
TokenSeq encode_example(const pddl::ProblemDef &prob,
                        const std::vector<std::string> &plan,
                        const Vocabulary &v);

} // namespace plangen::tokenizer
