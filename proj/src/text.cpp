// Copyright 2026, Stripe Kit authors.
#include "stripe/text.h"

#include <cctype>
#include <optional>
#include <sstream>
#include <vector>

namespace stripe {
namespace {

enum class Tok {
  Ident, Int, LBracket, RBracket, LParen, RParen, LBrace, RBrace,
  Colon, Comma, Eq, Star, Plus, Minus, Ge, Dollar, Hash, At, End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t value = 0;
  SourceSpan span;
};

// Tokenizes the whole input up front; the parser works over the vector.
class Lexer {
 public:
  explicit Lexer(const std::string& text) { tokenize(text); }

  const Token& peek() const { return tokens_[cursor_]; }
  const Token& peek2() const {
    return tokens_[std::min(cursor_ + 1, tokens_.size() - 1)];
  }
  Token next() {
    Token tok = tokens_[cursor_];
    if (cursor_ + 1 < tokens_.size()) cursor_++;
    return tok;
  }

 private:
  void tokenize(const std::string& text) {
    std::size_t pos = 0;
    int line = 1;
    int col = 1;
    auto take = [&] {
      if (text[pos] == '\n') {
        line++;
        col = 1;
      } else {
        col++;
      }
      pos++;
    };
    while (true) {
      while (pos < text.size()) {
        char c = text[pos];
        if (c == '/' && pos + 1 < text.size() && text[pos + 1] == '/') {
          while (pos < text.size() && text[pos] != '\n') take();
        } else if (std::isspace(static_cast<unsigned char>(c))) {
          take();
        } else {
          break;
        }
      }
      Token tok;
      tok.span = {line, col, pos, 0};
      if (pos >= text.size()) {
        tok.kind = Tok::End;
        tokens_.push_back(tok);
        return;
      }
      char c = text[pos];
      auto single = [&](Tok kind) {
        tok.kind = kind;
        tok.text = std::string(1, c);
        take();
      };
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        tok.kind = Tok::Ident;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
          tok.text += text[pos];
          take();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        tok.kind = Tok::Int;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
          tok.text += text[pos];
          take();
        }
        tok.value = std::stoll(tok.text);
      } else {
        switch (c) {
          case '[': single(Tok::LBracket); break;
          case ']': single(Tok::RBracket); break;
          case '(': single(Tok::LParen); break;
          case ')': single(Tok::RParen); break;
          case '{': single(Tok::LBrace); break;
          case '}': single(Tok::RBrace); break;
          case ':': single(Tok::Colon); break;
          case ',': single(Tok::Comma); break;
          case '=': single(Tok::Eq); break;
          case '*': single(Tok::Star); break;
          case '+': single(Tok::Plus); break;
          case '-': single(Tok::Minus); break;
          case '$': single(Tok::Dollar); break;
          case '#': single(Tok::Hash); break;
          case '@': single(Tok::At); break;
          case '>':
            if (pos + 1 < text.size() && text[pos + 1] == '=') {
              tok.kind = Tok::Ge;
              tok.text = ">=";
              take();
              take();
              break;
            }
            [[fallthrough]];
          default:
            throw ParseError("SyntaxError", std::string("unexpected character '") + c + "'",
                             tok.span);
        }
      }
      tok.span.length = pos - tok.span.offset;
      tokens_.push_back(std::move(tok));
    }
  }

  std::vector<Token> tokens_;
  std::size_t cursor_ = 0;
};

struct Scope {
  std::set<std::string> indexes;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  Program run() {
    if (lex_.peek().kind != Tok::Ident || lex_.peek().text != "block") {
      fail("expected 'block'");
    }
    Block root = parse_block();
    expect(Tok::End, "trailing input after program");
    return make_program(std::move(root));
  }

 private:
  [[noreturn]] void fail(const std::string& message, const char* code = "SyntaxError") {
    throw ParseError(code, message, lex_.peek().span);
  }

  Token expect(Tok kind, const std::string& what) {
    if (lex_.peek().kind != kind) fail("expected " + what);
    return lex_.next();
  }

  Token expect_ident(const std::string& what) { return expect(Tok::Ident, what); }

  bool accept(Tok kind) {
    if (lex_.peek().kind != kind) return false;
    lex_.next();
    return true;
  }

  std::int64_t parse_int() {
    bool neg = accept(Tok::Minus);
    Token tok = expect(Tok::Int, "integer");
    return neg ? -tok.value : tok.value;
  }

  const Scope* parent_scope() const { return scopes_.empty() ? nullptr : &scopes_.back(); }

  void check_index_names(const Affine& expr, const Scope* scope, const SourceSpan& span) {
    for (const auto& [name, coeff] : expr.terms()) {
      (void)coeff;
      if (scope == nullptr || scope->indexes.count(name) == 0) {
        throw ParseError("ScopeError", "index '" + name + "' is not in scope", span);
      }
    }
  }

  Affine parse_affine() {
    Affine result;
    bool first = true;
    for (;;) {
      std::int64_t sign = 1;
      if (accept(Tok::Minus)) {
        sign = -1;
      } else if (accept(Tok::Plus)) {
        sign = 1;
      } else if (!first) {
        break;
      }
      const Token& tok = lex_.peek();
      if (tok.kind == Tok::Int) {
        std::int64_t value = lex_.next().value;
        if (accept(Tok::Star)) {
          Token name = expect_ident("index name");
          result += Affine(name.text, sign * value);
        } else {
          result += sign * value;
        }
      } else if (tok.kind == Tok::Ident) {
        Token name = lex_.next();
        if (accept(Tok::Star)) {
          Token value = expect(Tok::Int, "coefficient");
          result += Affine(name.text, sign * value.value);
        } else {
          result += Affine(name.text, sign);
        }
      } else {
        fail("expected affine term");
      }
      first = false;
    }
    return result;
  }

  std::vector<std::int64_t> parse_int_list() {
    std::vector<std::int64_t> values;
    expect(Tok::LParen, "'('");
    if (!accept(Tok::RParen)) {
      values.push_back(parse_int());
      while (accept(Tok::Comma)) {
        values.push_back(parse_int());
      }
      expect(Tok::RParen, "')'");
    }
    return values;
  }

  Refinement parse_refinement(Dir dir, Block* block) {
    Refinement ref;
    ref.dir = dir;
    Token name = expect_ident("buffer name");
    ref.span = name.span;
    ref.buffer = name.text;
    expect(Tok::LBracket, "'['");
    if (!accept(Tok::RBracket)) {
      ref.offsets.push_back(parse_affine());
      while (accept(Tok::Comma)) {
        ref.offsets.push_back(parse_affine());
      }
      expect(Tok::RBracket, "']'");
    }
    for (const auto& offset : ref.offsets) {
      check_index_names(offset, &scopes_.back(), name.span);
    }
    if (accept(Tok::Colon)) {
      Token agg = expect_ident("aggregation op");
      auto op = agg_from_string(agg.text);
      if (!op) fail("unknown aggregation op '" + agg.text + "'");
      if (dir == Dir::In) fail("aggregation op not allowed on an in refinement");
      ref.agg = *op;
    }
    Token dtype = expect_ident("dtype");
    auto dt = dtype_from_string(dtype.text);
    if (!dt) fail("unknown dtype '" + dtype.text + "'");
    ref.dtype = *dt;
    ref.sizes = parse_int_list();
    expect(Tok::Colon, "':'");
    ref.strides = parse_int_list();
    if (ref.sizes.size() != ref.offsets.size() || ref.strides.size() != ref.offsets.size()) {
      fail("refinement rank mismatch between offsets, sizes and strides");
    }
    if (accept(Tok::At)) {
      Location loc;
      loc.unit = expect_ident("memory unit name").text;
      expect(Tok::LBracket, "'['");
      loc.bank = parse_affine();
      check_index_names(loc.bank, &scopes_.back(), name.span);
      expect(Tok::RBracket, "']'");
      expect(Tok::Colon, "':'");
      loc.address = parse_int();
      ref.location = loc;
    }
    while (lex_.peek().kind == Tok::Hash) {
      lex_.next();
      ref.tags.insert(expect_ident("tag name").text);
    }
    if (block->find_refinement(ref.buffer) != nullptr) {
      fail("duplicate refinement '" + ref.buffer + "'");
    }
    return ref;
  }

  Statement parse_statement(Block* block) {
    Statement stmt;
    stmt.span = lex_.peek().span;
    // Optional "N:" label; labels are not semantic and are discarded.
    if (lex_.peek().kind == Tok::Int && lex_.peek2().kind == Tok::Colon) {
      lex_.next();
      lex_.next();
      stmt.span = lex_.peek().span;
    }
    const Token& tok = lex_.peek();
    if (tok.kind == Tok::Ident && tok.text == "block" && lex_.peek2().kind == Tok::LBracket) {
      stmt.node = parse_block();
      return stmt;
    }
    if (tok.kind == Tok::Ident && tok.text == "special" && lex_.peek2().kind == Tok::Ident) {
      lex_.next();
      Special special;
      special.name = expect_ident("special name").text;
      expect(Tok::LParen, "'('");
      special.args.push_back(expect_ident("refinement name").text);
      while (accept(Tok::Comma)) {
        special.args.push_back(expect_ident("refinement name").text);
      }
      expect(Tok::RParen, "')'");
      for (const auto& arg : special.args) {
        if (block->find_refinement(arg) == nullptr) {
          throw ParseError("ScopeError", "special names undeclared buffer '" + arg + "'",
                           stmt.span);
        }
      }
      stmt.node = std::move(special);
      return stmt;
    }
    if (tok.kind == Tok::Dollar) {
      lex_.next();
      std::string into = "$" + expect_ident("temp name").text;
      expect(Tok::Eq, "'='");
      Token op = expect_ident("intrinsic name");
      expect(Tok::LParen, "'('");
      if (op.text == "load") {
        Load load;
        load.into = into;
        load.from = expect_ident("refinement name").text;
        expect(Tok::RParen, "')'");
        if (block->find_refinement(load.from) == nullptr) {
          throw ParseError("ScopeError", "load names undeclared buffer '" + load.from + "'",
                           stmt.span);
        }
        stmt.node = std::move(load);
        return stmt;
      }
      Intrinsic intr;
      intr.op = op.text;
      intr.into = into;
      if (!accept(Tok::RParen)) {
        do {
          if (accept(Tok::Dollar)) {
            intr.args.emplace_back("$" + expect_ident("temp name").text);
          } else {
            intr.args.emplace_back(parse_int());
          }
        } while (accept(Tok::Comma));
        expect(Tok::RParen, "')'");
      }
      stmt.node = std::move(intr);
      return stmt;
    }
    if (tok.kind == Tok::Ident && lex_.peek2().kind == Tok::Eq) {
      Store store;
      store.into = lex_.next().text;
      lex_.next();
      Token op = expect_ident("'store'");
      if (op.text != "store") fail("expected 'store'");
      expect(Tok::LParen, "'('");
      expect(Tok::Dollar, "'$'");
      store.from = "$" + expect_ident("temp name").text;
      expect(Tok::RParen, "')'");
      if (block->find_refinement(store.into) == nullptr) {
        throw ParseError("ScopeError", "store names undeclared buffer '" + store.into + "'",
                         stmt.span);
      }
      stmt.node = std::move(store);
      return stmt;
    }
    fail("expected statement");
  }

  Block parse_block() {
    Block block;
    block.span = lex_.peek().span;
    expect_ident("'block'");
    expect(Tok::LBracket, "'['");
    bool saw_alias = false;
    if (!accept(Tok::RBracket)) {
      do {
        Index idx;
        Token name = expect_ident("index name");
        idx.name = name.text;
        idx.span = name.span;
        if (block.find_index(idx.name) != nullptr) {
          fail("duplicate index '" + idx.name + "'");
        }
        if (accept(Tok::Colon)) {
          if (saw_alias) fail("ranged index after alias index");
          idx.range = parse_int();
          if (idx.range < 1) fail("index range must be >= 1");
        } else {
          expect(Tok::Eq, "':' or '='");
          idx.alias = parse_affine();
          check_index_names(*idx.alias, parent_scope(), name.span);
          saw_alias = true;
        }
        block.indexes.push_back(std::move(idx));
      } while (accept(Tok::Comma));
      expect(Tok::RBracket, "']'");
    }
    if (accept(Tok::Colon)) {
      block.annotation = parse_int();
    }

    scopes_.emplace_back();
    for (const auto& idx : block.indexes) {
      scopes_.back().indexes.insert(idx.name);
    }

    expect(Tok::LParen, "'('");
    bool saw_body = false;
    while (!accept(Tok::RParen)) {
      const Token& tok = lex_.peek();
      if (tok.kind == Tok::Hash) {
        if (saw_body) fail("block tags must precede constraints and refinements");
        lex_.next();
        block.tags.insert(expect_ident("tag name").text);
        continue;
      }
      saw_body = true;
      if (tok.kind == Tok::Ident &&
          (tok.text == "in" || tok.text == "out" || tok.text == "inout")) {
        Dir dir = tok.text == "in" ? Dir::In : tok.text == "out" ? Dir::Out : Dir::InOut;
        lex_.next();
        block.refinements.push_back(parse_refinement(dir, &block));
        continue;
      }
      Constraint constraint;
      constraint.span = tok.span;
      constraint.expr = parse_affine();
      check_index_names(constraint.expr, &scopes_.back(), constraint.span);
      expect(Tok::Ge, "'>='");
      Token zero = expect(Tok::Int, "'0'");
      if (zero.value != 0) fail("constraint right-hand side must be 0");
      block.constraints.push_back(std::move(constraint));
    }

    expect(Tok::LBrace, "'{'");
    while (!accept(Tok::RBrace)) {
      block.stmts.push_back(parse_statement(&block));
    }
    scopes_.pop_back();
    return block;
  }

  Lexer lex_;
  std::vector<Scope> scopes_;
};

class Printer {
 public:
  explicit Printer(std::ostream& os) : os_(os) {}

  void print(const Block& block, int depth) {
    tab(depth);
    os_ << "block [";
    bool first = true;
    for (const auto& idx : block.indexes) {
      if (!first) os_ << ", ";
      first = false;
      if (idx.is_alias()) {
        os_ << idx.name << "=" << idx.alias->to_string();
      } else {
        os_ << idx.name << ":" << idx.range;
      }
    }
    os_ << "]:" << block.printed_annotation() << " (\n";
    for (const auto& tag : block.tags) {
      tab(depth + 1);
      os_ << "#" << tag << "\n";
    }
    for (const auto& constraint : block.constraints) {
      tab(depth + 1);
      os_ << constraint.expr.to_string() << " >= 0\n";
    }
    for (const auto& ref : block.refinements) {
      tab(depth + 1);
      print_refinement(ref);
      os_ << "\n";
    }
    tab(depth);
    os_ << ") {\n";
    for (std::size_t i = 0; i < block.stmts.size(); i++) {
      const auto& stmt = block.stmts[i];
      tab(depth + 1);
      os_ << i << ":";
      if (stmt.is_block()) {
        os_ << "\n";
        print(stmt.block(), depth + 1);
      } else {
        os_ << " ";
        print_leaf(stmt);
        os_ << "\n";
      }
    }
    tab(depth);
    os_ << "}\n";
  }

 private:
  void tab(int depth) {
    for (int i = 0; i < depth; i++) os_ << "\t";
  }

  void print_refinement(const Refinement& ref) {
    os_ << to_string(ref.dir) << " " << ref.buffer << "[";
    for (std::size_t i = 0; i < ref.offsets.size(); i++) {
      if (i > 0) os_ << ", ";
      os_ << ref.offsets[i].to_string();
    }
    os_ << "]";
    if (ref.agg) {
      os_ << ":" << to_string(*ref.agg);
    }
    os_ << " " << to_string(ref.dtype);
    print_ints(ref.sizes);
    os_ << ":";
    print_ints(ref.strides);
    if (ref.location) {
      os_ << " @" << ref.location->unit << "[" << ref.location->bank.to_string()
          << "]:" << ref.location->address;
    }
    for (const auto& tag : ref.tags) {
      os_ << " #" << tag;
    }
  }

  void print_ints(const std::vector<std::int64_t>& values) {
    os_ << "(";
    for (std::size_t i = 0; i < values.size(); i++) {
      if (i > 0) os_ << ", ";
      os_ << values[i];
    }
    os_ << ")";
  }

  void print_leaf(const Statement& stmt) {
    if (const auto* load = std::get_if<Load>(&stmt.node)) {
      os_ << load->into << " = load(" << load->from << ")";
    } else if (const auto* store = std::get_if<Store>(&stmt.node)) {
      os_ << store->into << " = store(" << store->from << ")";
    } else if (const auto* intr = std::get_if<Intrinsic>(&stmt.node)) {
      os_ << intr->into << " = " << intr->op << "(";
      for (std::size_t i = 0; i < intr->args.size(); i++) {
        if (i > 0) os_ << ", ";
        if (const auto* temp = std::get_if<std::string>(&intr->args[i])) {
          os_ << *temp;
        } else {
          os_ << std::get<std::int64_t>(intr->args[i]);
        }
      }
      os_ << ")";
    } else if (const auto* special = std::get_if<Special>(&stmt.node)) {
      os_ << "special " << special->name << "(";
      for (std::size_t i = 0; i < special->args.size(); i++) {
        if (i > 0) os_ << ", ";
        os_ << special->args[i];
      }
      os_ << ")";
    }
  }

  std::ostream& os_;
};

}  // namespace

Program parse_program(const std::string& text) { return Parser(text).run(); }

std::string print_block(const Block& block) {
  std::ostringstream os;
  Printer(os).print(block, 0);
  return os.str();
}

std::string print_program(const Program& program) { return print_block(program.root); }

}  // namespace stripe
