#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cotpot/rational.hpp"

// A tiny imperative expression language: `let` bindings over exact rationals,
// one final `answer` statement. This is the deterministic stand-in for the
// code interpreter that program-style rationales hand their arithmetic to.
namespace cotpot::minilang {

struct SourcePos {
  int line = 1;    // 1-based
  int column = 1;  // 1-based
  bool operator==(const SourcePos&) const = default;
};

enum class TokenKind {
  Let,
  Answer,
  Ident,
  IntLiteral,
  Plus,
  Minus,
  Star,
  Slash,
  LParen,
  RParen,
  Assign,
  Semicolon,
  Comment,
  Eof,
};

const char* token_kind_name(TokenKind k);

struct Token {
  TokenKind kind;
  std::string lexeme;
  SourcePos pos;
};

// ---- typed errors -------------------------------------------------------

enum class ErrorKind {
  Lex,
  Parse,
  MissingAnswer,
  TrailingStatements,
  UndefinedVariable,
  DivisionByZero,
  Redefinition,
  LimitExceeded,
};

struct Error {
  ErrorKind kind;
  SourcePos pos;
  std::string detail;  // expected token, variable name, budget, ...

  std::string to_string() const;
};

const char* error_kind_name(ErrorKind k);

// Wire/exit-code id for an error class; stable and documented in the CLI.
int error_kind_code(ErrorKind k);

template <typename T>
struct Result {
  std::variant<T, Error> v;
  bool ok() const { return v.index() == 0; }
  const T& value() const { return std::get<0>(v); }
  T& value() { return std::get<0>(v); }
  const Error& error() const { return std::get<1>(v); }
};

// ---- AST -----------------------------------------------------------------

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class BinaryOp { Add, Sub, Mul, Div };

char binary_op_char(BinaryOp op);

struct Expr {
  struct Literal {
    std::string digits;  // nonempty decimal string
  };
  struct Var {
    std::string name;
  };
  struct Binary {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
  };
  struct Negate {
    ExprPtr operand;
  };
  std::variant<Literal, Var, Binary, Negate> node;
  SourcePos pos;
};

struct Stmt {
  struct LetBinding {
    std::string name;
    ExprPtr value;
  };
  struct AnswerStmt {
    ExprPtr value;
  };
  std::variant<LetBinding, AnswerStmt> node;
  SourcePos pos;
};

// Statement list; parse() guarantees exactly one AnswerStmt, in last position.
struct Program {
  std::vector<Stmt> statements;
};

struct EvalLimits {
  int max_statements = 64;
  std::size_t max_digits = 10000;
};

// ---- operations ----------------------------------------------------------

Result<std::vector<Token>> tokenize(std::string_view source);
Result<Program> parse(const std::vector<Token>& tokens);
Result<Rational> evaluate(const Program& program, const EvalLimits& limits = {});

// tokenize + parse + evaluate in one call.
Result<Rational> run(std::string_view source, const EvalLimits& limits = {});

// Canonical source form; parse(print(p)) is structurally identical to p.
std::string print(const Program& program);

enum class CheckOutcome { Correct, Wrong, Invalid };

struct CheckResult {
  CheckOutcome outcome;
  std::optional<Rational> got;  // set for Correct and Wrong
  std::optional<Error> error;   // set for Invalid
};

// The verification primitive: a program is Correct iff it runs and its answer
// equals `gold` exactly.
CheckResult check_program(std::string_view source, const Rational& gold,
                          const EvalLimits& limits = {});

}  // namespace cotpot::minilang
