#include "cotpot/minilang.hpp"

#include <cctype>
#include <map>
#include <sstream>

namespace cotpot::minilang {

const char* token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::Let: return "let";
    case TokenKind::Answer: return "answer";
    case TokenKind::Ident: return "identifier";
    case TokenKind::IntLiteral: return "integer";
    case TokenKind::Plus: return "'+'";
    case TokenKind::Minus: return "'-'";
    case TokenKind::Star: return "'*'";
    case TokenKind::Slash: return "'/'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::Assign: return "'='";
    case TokenKind::Semicolon: return "';'";
    case TokenKind::Comment: return "comment";
    case TokenKind::Eof: return "end of input";
  }
  return "?";
}

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Lex: return "LexError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::MissingAnswer: return "MissingAnswer";
    case ErrorKind::TrailingStatements: return "TrailingStatements";
    case ErrorKind::UndefinedVariable: return "UndefinedVariable";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::Redefinition: return "Redefinition";
    case ErrorKind::LimitExceeded: return "LimitExceeded";
  }
  return "?";
}

int error_kind_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Lex: return 10;
    case ErrorKind::Parse: return 11;
    case ErrorKind::MissingAnswer: return 12;
    case ErrorKind::TrailingStatements: return 13;
    case ErrorKind::UndefinedVariable: return 14;
    case ErrorKind::DivisionByZero: return 15;
    case ErrorKind::Redefinition: return 16;
    case ErrorKind::LimitExceeded: return 17;
  }
  return 1;
}

std::string Error::to_string() const {
  std::ostringstream os;
  os << error_kind_name(kind) << " at " << pos.line << ":" << pos.column;
  if (!detail.empty()) os << ": " << detail;
  return os.str();
}

char binary_op_char(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return '+';
    case BinaryOp::Sub: return '-';
    case BinaryOp::Mul: return '*';
    case BinaryOp::Div: return '/';
  }
  return '?';
}

// ---- lexer -----------------------------------------------------------------

namespace {

bool is_ident_start(char c) { return c >= 'a' && c <= 'z'; }
bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

Result<std::vector<Token>> tokenize(std::string_view source) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](char c) {
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  };
  while (i < source.size()) {
    char c = source[i];
    SourcePos pos{line, col};
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(c);
      ++i;
      continue;
    }
    if (c == '#') {
      std::string text;
      while (i < source.size() && source[i] != '\n') {
        text.push_back(source[i]);
        advance(source[i]);
        ++i;
      }
      out.push_back({TokenKind::Comment, text, pos});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string digits;
      while (i < source.size() &&
             std::isdigit(static_cast<unsigned char>(source[i]))) {
        digits.push_back(source[i]);
        advance(source[i]);
        ++i;
      }
      out.push_back({TokenKind::IntLiteral, digits, pos});
      continue;
    }
    if (is_ident_start(c)) {
      std::string word;
      while (i < source.size() && is_ident_char(source[i])) {
        word.push_back(source[i]);
        advance(source[i]);
        ++i;
      }
      TokenKind kind = TokenKind::Ident;
      if (word == "let") kind = TokenKind::Let;
      else if (word == "answer") kind = TokenKind::Answer;
      out.push_back({kind, word, pos});
      continue;
    }
    TokenKind kind;
    switch (c) {
      case '+': kind = TokenKind::Plus; break;
      case '-': kind = TokenKind::Minus; break;
      case '*': kind = TokenKind::Star; break;
      case '/': kind = TokenKind::Slash; break;
      case '(': kind = TokenKind::LParen; break;
      case ')': kind = TokenKind::RParen; break;
      case '=': kind = TokenKind::Assign; break;
      case ';': kind = TokenKind::Semicolon; break;
      default:
        return {Error{ErrorKind::Lex, pos,
                      std::string("unexpected character '") + c + "'"}};
    }
    out.push_back({kind, std::string(1, c), pos});
    advance(c);
    ++i;
  }
  out.push_back({TokenKind::Eof, "", {line, col}});
  return {std::move(out)};
}

// ---- parser ----------------------------------------------------------------

namespace {

// Recursive descent with the usual precedence ladder:
//   expr   := term  (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | INT | IDENT | '(' expr ')'
class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  Result<Program> parse_program() {
    Program program;
    bool saw_answer = false;
    while (peek().kind != TokenKind::Eof) {
      if (saw_answer) {
        return {Error{ErrorKind::TrailingStatements, peek().pos,
                      "statements after answer"}};
      }
      auto stmt = parse_stmt();
      if (!stmt.ok()) return {stmt.error()};
      saw_answer = std::holds_alternative<Stmt::AnswerStmt>(stmt.value().node);
      program.statements.push_back(std::move(stmt.value()));
    }
    if (!saw_answer) {
      return {Error{ErrorKind::MissingAnswer, peek().pos,
                    "program has no answer statement"}};
    }
    return {std::move(program)};
  }

 private:
  const Token& peek() {
    while (tokens_[i_].kind == TokenKind::Comment) ++i_;
    return tokens_[i_];
  }
  Token take() {
    const Token& t = peek();
    ++i_;
    return t;
  }
  std::optional<Error> expect(TokenKind kind) {
    const Token& t = peek();
    if (t.kind != kind) {
      return Error{ErrorKind::Parse, t.pos,
                   std::string("expected ") + token_kind_name(kind) + ", got " +
                       token_kind_name(t.kind)};
    }
    ++i_;
    return std::nullopt;
  }

  Result<Stmt> parse_stmt() {
    const Token& t = peek();
    if (t.kind == TokenKind::Let) {
      take();
      const Token& name = peek();
      if (auto e = expect(TokenKind::Ident)) return {*e};
      if (auto e = expect(TokenKind::Assign)) return {*e};
      auto value = parse_expr();
      if (!value.ok()) return {value.error()};
      if (auto e = expect(TokenKind::Semicolon)) return {*e};
      Stmt s;
      s.pos = t.pos;
      s.node = Stmt::LetBinding{name.lexeme, std::move(value.value())};
      return {std::move(s)};
    }
    if (t.kind == TokenKind::Answer) {
      take();
      auto value = parse_expr();
      if (!value.ok()) return {value.error()};
      if (auto e = expect(TokenKind::Semicolon)) return {*e};
      Stmt s;
      s.pos = t.pos;
      s.node = Stmt::AnswerStmt{std::move(value.value())};
      return {std::move(s)};
    }
    return {Error{ErrorKind::Parse, t.pos,
                  std::string("expected let or answer, got ") +
                      token_kind_name(t.kind)}};
  }

  Result<ExprPtr> parse_expr() {
    auto lhs = parse_term();
    if (!lhs.ok()) return lhs;
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Plus && t.kind != TokenKind::Minus) break;
      take();
      auto rhs = parse_term();
      if (!rhs.ok()) return rhs;
      auto node = std::make_unique<Expr>();
      node->pos = t.pos;
      node->node = Expr::Binary{
          t.kind == TokenKind::Plus ? BinaryOp::Add : BinaryOp::Sub,
          std::move(lhs.value()), std::move(rhs.value())};
      lhs = {std::move(node)};
    }
    return lhs;
  }

  Result<ExprPtr> parse_term() {
    auto lhs = parse_factor();
    if (!lhs.ok()) return lhs;
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Star && t.kind != TokenKind::Slash) break;
      take();
      auto rhs = parse_factor();
      if (!rhs.ok()) return rhs;
      auto node = std::make_unique<Expr>();
      node->pos = t.pos;
      node->node = Expr::Binary{
          t.kind == TokenKind::Star ? BinaryOp::Mul : BinaryOp::Div,
          std::move(lhs.value()), std::move(rhs.value())};
      lhs = {std::move(node)};
    }
    return lhs;
  }

  Result<ExprPtr> parse_factor() {
    const Token& t = peek();
    if (t.kind == TokenKind::Minus) {
      take();
      auto operand = parse_factor();
      if (!operand.ok()) return operand;
      auto node = std::make_unique<Expr>();
      node->pos = t.pos;
      node->node = Expr::Negate{std::move(operand.value())};
      return {std::move(node)};
    }
    if (t.kind == TokenKind::IntLiteral) {
      take();
      auto node = std::make_unique<Expr>();
      node->pos = t.pos;
      node->node = Expr::Literal{t.lexeme};
      return {std::move(node)};
    }
    if (t.kind == TokenKind::Ident) {
      take();
      auto node = std::make_unique<Expr>();
      node->pos = t.pos;
      node->node = Expr::Var{t.lexeme};
      return {std::move(node)};
    }
    if (t.kind == TokenKind::LParen) {
      take();
      auto inner = parse_expr();
      if (!inner.ok()) return inner;
      if (auto e = expect(TokenKind::RParen)) return {*e};
      return inner;
    }
    return {Error{ErrorKind::Parse, t.pos,
                  std::string("expected expression, got ") +
                      token_kind_name(t.kind)}};
  }

  const std::vector<Token>& tokens_;
  std::size_t i_ = 0;
};

}  // namespace

Result<Program> parse(const std::vector<Token>& tokens) {
  return Parser(tokens).parse_program();
}

// ---- evaluator -------------------------------------------------------------

namespace {

struct EvalContext {
  std::map<std::string, Rational> env;
  const EvalLimits* limits;
};

Result<Rational> eval_expr(const Expr& expr, EvalContext& ctx) {
  if (const auto* lit = std::get_if<Expr::Literal>(&expr.node)) {
    if (lit->digits.size() > ctx.limits->max_digits) {
      return {Error{ErrorKind::LimitExceeded, expr.pos,
                    "digit budget exceeded"}};
    }
    return {Rational(mpz_class(lit->digits), mpz_class(1))};
  }
  if (const auto* var = std::get_if<Expr::Var>(&expr.node)) {
    auto it = ctx.env.find(var->name);
    if (it == ctx.env.end()) {
      return {Error{ErrorKind::UndefinedVariable, expr.pos, var->name}};
    }
    return {it->second};
  }
  if (const auto* neg = std::get_if<Expr::Negate>(&expr.node)) {
    auto inner = eval_expr(*neg->operand, ctx);
    if (!inner.ok()) return inner;
    return {-inner.value()};
  }
  const auto& bin = std::get<Expr::Binary>(expr.node);
  auto lhs = eval_expr(*bin.lhs, ctx);
  if (!lhs.ok()) return lhs;
  auto rhs = eval_expr(*bin.rhs, ctx);
  if (!rhs.ok()) return rhs;
  Rational result;
  switch (bin.op) {
    case BinaryOp::Add: result = lhs.value() + rhs.value(); break;
    case BinaryOp::Sub: result = lhs.value() - rhs.value(); break;
    case BinaryOp::Mul: result = lhs.value() * rhs.value(); break;
    case BinaryOp::Div:
      if (rhs.value().is_zero()) {
        return {Error{ErrorKind::DivisionByZero, expr.pos, ""}};
      }
      result = lhs.value() / rhs.value();
      break;
  }
  if (result.max_digits() > ctx.limits->max_digits) {
    return {Error{ErrorKind::LimitExceeded, expr.pos,
                  "digit budget exceeded"}};
  }
  return {std::move(result)};
}

}  // namespace

Result<Rational> evaluate(const Program& program, const EvalLimits& limits) {
  EvalContext ctx;
  ctx.limits = &limits;
  int executed = 0;
  for (const auto& stmt : program.statements) {
    if (++executed > limits.max_statements) {
      return {Error{ErrorKind::LimitExceeded, stmt.pos,
                    "statement budget exceeded"}};
    }
    if (const auto* let = std::get_if<Stmt::LetBinding>(&stmt.node)) {
      if (ctx.env.contains(let->name)) {
        return {Error{ErrorKind::Redefinition, stmt.pos, let->name}};
      }
      auto value = eval_expr(*let->value, ctx);
      if (!value.ok()) return value;
      ctx.env.emplace(let->name, std::move(value.value()));
    } else {
      const auto& ans = std::get<Stmt::AnswerStmt>(stmt.node);
      return eval_expr(*ans.value, ctx);
    }
  }
  // parse() guarantees a final AnswerStmt, so this is only reachable when the
  // statement budget ran out exactly at the answer.
  return {Error{ErrorKind::LimitExceeded, {}, "statement budget exceeded"}};
}

Result<Rational> run(std::string_view source, const EvalLimits& limits) {
  auto tokens = tokenize(source);
  if (!tokens.ok()) return {tokens.error()};
  auto program = parse(tokens.value());
  if (!program.ok()) return {program.error()};
  return evaluate(program.value(), limits);
}

// ---- printer ---------------------------------------------------------------

namespace {

int precedence_of(const Expr& e) {
  if (std::holds_alternative<Expr::Binary>(e.node)) {
    auto op = std::get<Expr::Binary>(e.node).op;
    return (op == BinaryOp::Add || op == BinaryOp::Sub) ? 1 : 2;
  }
  if (std::holds_alternative<Expr::Negate>(e.node)) return 3;
  return 4;
}

void print_expr(const Expr& e, std::ostringstream& os) {
  if (const auto* lit = std::get_if<Expr::Literal>(&e.node)) {
    os << lit->digits;
    return;
  }
  if (const auto* var = std::get_if<Expr::Var>(&e.node)) {
    os << var->name;
    return;
  }
  if (const auto* neg = std::get_if<Expr::Negate>(&e.node)) {
    os << "-";
    bool paren = precedence_of(*neg->operand) < 3;
    if (paren) os << "(";
    print_expr(*neg->operand, os);
    if (paren) os << ")";
    return;
  }
  const auto& bin = std::get<Expr::Binary>(e.node);
  int prec = precedence_of(e);
  // Left-associative: the right child needs parens at equal precedence.
  bool lparen = precedence_of(*bin.lhs) < prec;
  bool rparen = precedence_of(*bin.rhs) <= prec;
  if (lparen) os << "(";
  print_expr(*bin.lhs, os);
  if (lparen) os << ")";
  os << " " << binary_op_char(bin.op) << " ";
  if (rparen) os << "(";
  print_expr(*bin.rhs, os);
  if (rparen) os << ")";
}

}  // namespace

std::string print(const Program& program) {
  std::ostringstream os;
  for (const auto& stmt : program.statements) {
    if (const auto* let = std::get_if<Stmt::LetBinding>(&stmt.node)) {
      os << "let " << let->name << " = ";
      print_expr(*let->value, os);
    } else {
      os << "answer ";
      print_expr(*std::get<Stmt::AnswerStmt>(stmt.node).value, os);
    }
    os << ";\n";
  }
  return os.str();
}

CheckResult check_program(std::string_view source, const Rational& gold,
                          const EvalLimits& limits) {
  auto result = run(source, limits);
  if (!result.ok()) {
    return {CheckOutcome::Invalid, std::nullopt, result.error()};
  }
  if (result.value() == gold) {
    return {CheckOutcome::Correct, result.value(), std::nullopt};
  }
  return {CheckOutcome::Wrong, result.value(), std::nullopt};
}

}  // namespace cotpot::minilang
