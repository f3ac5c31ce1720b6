#ifndef CODENAT_LEXER_HPP
#define CODENAT_LEXER_HPP

// Lexical tokenizer for source files. Produces a flat token stream with byte
// spans and 1-based line numbers; whitespace is skipped but recoverable from
// the gaps between spans, so the original text can always be rebuilt.
//
// Comments and string/char literals (including Java text blocks) are single
// tokens. Blank lines produce no tokens and no synthetic newline token is
// emitted; line boundaries are recoverable from Token::line.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "codenat/digest.hpp"
#include "codenat/error.hpp"

namespace codenat {

enum class TokenKind {
  kIdentifier,
  kKeyword,
  kNumberLiteral,
  kStringLiteral,
  kOperator,
  kPunctuation,
  kComment,
  kNewline,  // reserved; the lexer never emits it
};

inline std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::kIdentifier: return "identifier";
    case TokenKind::kKeyword: return "keyword";
    case TokenKind::kNumberLiteral: return "number-literal";
    case TokenKind::kStringLiteral: return "string-literal";
    case TokenKind::kOperator: return "operator";
    case TokenKind::kPunctuation: return "punctuation";
    case TokenKind::kComment: return "comment";
    case TokenKind::kNewline: return "newline";
  }
  return "unknown";
}

enum class LanguageHint { kJava, kCLike, kPlain };

inline LanguageHint parse_language_hint(std::string_view name) {
  if (name == "java") return LanguageHint::kJava;
  if (name == "c-like" || name == "c" || name == "cpp") {
    return LanguageHint::kCLike;
  }
  if (name == "plain") return LanguageHint::kPlain;
  throw InputError("unknown language hint '" + std::string(name) + "'");
}

/// Guesses the hint from a file extension; unknown extensions lex as plain.
inline LanguageHint hint_for_path(std::string_view path) {
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return LanguageHint::kPlain;
  const auto ext = path.substr(dot + 1);
  if (ext == "java") return LanguageHint::kJava;
  static constexpr std::array<std::string_view, 14> kCLike = {
      "c", "h", "cc", "cpp", "cxx", "hpp", "hh", "hxx", "cs", "js", "ts",
      "go", "rs", "kt"};
  for (const auto e : kCLike) {
    if (ext == e) return LanguageHint::kCLike;
  }
  return LanguageHint::kPlain;
}

struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive

  bool operator==(const ByteSpan&) const = default;
};

struct Token {
  std::string text;
  TokenKind kind = TokenKind::kIdentifier;
  ByteSpan span;
  int line = 1;  // line of span.start

  bool operator==(const Token&) const = default;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::string source_digest;
  int line_count = 1;
  // Recoverable lexing problems (unterminated literals/comments).
  std::vector<std::string> warnings;

  bool operator==(const TokenStream&) const = default;
};

/// Inclusive index range of the tokens on one line.
struct TokenRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const { return last - first + 1; }
  bool operator==(const TokenRange&) const = default;
};

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    unsigned min_cp = 0;
    unsigned cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2, min_cp = 0x80, cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3, min_cp = 0x800, cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4, min_cp = 0x10000, cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c == '$' || static_cast<unsigned char>(c) >= 0x80;
}

inline bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 0x21 && u <= 0x2F) || (u >= 0x3A && u <= 0x40) ||
         (u >= 0x5B && u <= 0x60) || (u >= 0x7B && u <= 0x7E);
}

inline const std::unordered_set<std::string_view>& java_keywords() {
  static const std::unordered_set<std::string_view> kWords = {
      "abstract", "assert",     "boolean",   "break",     "byte",
      "case",     "catch",      "char",      "class",     "const",
      "continue", "default",    "do",        "double",    "else",
      "enum",     "extends",    "final",     "finally",   "float",
      "for",      "goto",       "if",        "implements", "import",
      "instanceof", "int",      "interface", "long",      "native",
      "new",      "package",    "private",   "protected", "public",
      "return",   "short",      "static",    "strictfp",  "super",
      "switch",   "synchronized", "this",    "throw",     "throws",
      "transient", "try",       "void",      "volatile",  "while",
      "true",     "false",      "null",      "var",       "record",
      "yield",    "sealed",     "permits"};
  return kWords;
}

inline const std::unordered_set<std::string_view>& c_like_keywords() {
  static const std::unordered_set<std::string_view> kWords = {
      "auto",      "break",     "case",      "char",     "const",
      "continue",  "default",   "do",        "double",   "else",
      "enum",      "extern",    "float",     "for",      "goto",
      "if",        "inline",    "int",       "long",     "register",
      "restrict",  "return",    "short",     "signed",   "sizeof",
      "static",    "struct",    "switch",    "typedef",  "union",
      "unsigned",  "void",      "volatile",  "while",    "bool",
      "true",      "false",     "nullptr",   "class",    "namespace",
      "template",  "typename",  "public",    "private",  "protected",
      "virtual",   "override",  "final",     "new",      "delete",
      "this",      "throw",     "try",       "catch",    "using",
      "constexpr", "noexcept",  "operator",  "friend",   "explicit",
      "static_cast", "dynamic_cast", "reinterpret_cast", "const_cast",
      "mutable",   "decltype",  "concept",   "requires", "co_await",
      "co_return", "co_yield"};
  return kWords;
}

// Longest first so that maximal munch is a linear scan.
inline constexpr std::array<std::string_view, 41> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "...", "<=>", "->", "::", "++", "--", "&&",
    "||",   "==",  "!=",  "<=",  ">=",  "+=",  "-=", "*=", "/=", "%=", "&=",
    "|=",   "^=",  "<<",  ">>",  "+",   "-",   "*",  "/",  "%",  "=",  "<",
    ">",    "!",   "&",   "|",   "^",   "~",   "?",  ":"};

class Lexer {
 public:
  Lexer(std::string_view src, LanguageHint hint) : src_(src), hint_(hint) {}

  TokenStream run() {
    TokenStream out;
    out.source_digest = sha256_hex(src_);
    out.line_count = count_lines(src_);
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (is_space(c)) {
        if (c == '\n') ++line_;
        ++pos_;
        continue;
      }
      if (hint_ == LanguageHint::kPlain) {
        lex_plain(out);
      } else {
        lex_code(out);
      }
    }
    return out;
  }

  static int count_lines(std::string_view s) {
    const auto newlines =
        static_cast<int>(std::count(s.begin(), s.end(), '\n'));
    const int lines = newlines + ((!s.empty() && s.back() != '\n') ? 1 : 0);
    return std::max(lines, 1);
  }

 private:
  void emit(TokenStream& out, TokenKind kind, std::size_t start,
            std::size_t end) {
    Token tok;
    tok.text = std::string(src_.substr(start, end - start));
    tok.kind = kind;
    tok.span = {start, end};
    tok.line = line_;
    line_ += static_cast<int>(std::count(tok.text.begin(), tok.text.end(), '\n'));
    out.tokens.push_back(std::move(tok));
    pos_ = end;
  }

  void warn(TokenStream& out, const std::string& what) {
    out.warnings.push_back("line " + std::to_string(line_) + ": " + what);
  }

  void lex_plain(TokenStream& out) {
    const std::size_t start = pos_;
    if (is_ascii_punct(src_[pos_])) {
      emit(out, TokenKind::kPunctuation, start, start + 1);
      return;
    }
    std::size_t end = start;
    bool all_digits = true;
    while (end < src_.size() && !is_space(src_[end]) &&
           !is_ascii_punct(src_[end])) {
      all_digits = all_digits && is_digit(src_[end]);
      ++end;
    }
    emit(out, all_digits ? TokenKind::kNumberLiteral : TokenKind::kIdentifier,
         start, end);
  }

  void lex_code(TokenStream& out) {
    const std::size_t start = pos_;
    const char c = src_[pos_];
    const char next = pos_ + 1 < src_.size() ? src_[pos_ + 1] : '\0';

    if (c == '/' && next == '/') {
      std::size_t end = src_.find('\n', start);
      if (end == std::string_view::npos) end = src_.size();
      emit(out, TokenKind::kComment, start, end);
      return;
    }
    if (c == '/' && next == '*') {
      std::size_t end = src_.find("*/", start + 2);
      if (end == std::string_view::npos) {
        warn(out, "unterminated block comment");
        end = src_.size();
      } else {
        end += 2;
      }
      emit(out, TokenKind::kComment, start, end);
      return;
    }
    if (c == '"' && hint_ == LanguageHint::kJava &&
        src_.substr(start, 3) == "\"\"\"") {
      lex_text_block(out);
      return;
    }
    if (c == '"' || c == '\'') {
      lex_quoted(out, c);
      return;
    }
    if (is_digit(c) || (c == '.' && is_digit(next))) {
      lex_number(out);
      return;
    }
    if (is_ident_start(c)) {
      std::size_t end = start;
      while (end < src_.size() && is_ident_char(src_[end])) ++end;
      const auto word = src_.substr(start, end - start);
      const auto& keywords =
          hint_ == LanguageHint::kJava ? java_keywords() : c_like_keywords();
      emit(out,
           keywords.contains(word) ? TokenKind::kKeyword
                                   : TokenKind::kIdentifier,
           start, end);
      return;
    }
    for (const auto op : kOperators) {
      if (src_.substr(start, op.size()) == op) {
        emit(out, TokenKind::kOperator, start, start + op.size());
        return;
      }
    }
    emit(out, TokenKind::kPunctuation, start, start + 1);
  }

  // String or char literal; an unterminated one stops at end of line.
  void lex_quoted(TokenStream& out, char quote) {
    const std::size_t start = pos_;
    std::size_t i = start + 1;
    while (i < src_.size()) {
      const char ch = src_[i];
      if (ch == '\\' && i + 1 < src_.size() && src_[i + 1] != '\n') {
        i += 2;
        continue;
      }
      if (ch == quote) {
        emit(out, TokenKind::kStringLiteral, start, i + 1);
        return;
      }
      if (ch == '\n') break;
      ++i;
    }
    warn(out, quote == '"' ? "unterminated string literal"
                           : "unterminated char literal");
    // Keep a trailing '\r' out of the token so CRLF files lex like LF files.
    std::size_t end = i;
    if (end > start + 1 && src_[end - 1] == '\r') --end;
    emit(out, TokenKind::kStringLiteral, start, end);
  }

  void lex_text_block(TokenStream& out) {
    const std::size_t start = pos_;
    std::size_t i = start + 3;
    while (i < src_.size()) {
      if (src_[i] == '\\' && i + 1 < src_.size()) {
        i += 2;
        continue;
      }
      if (src_.substr(i, 3) == "\"\"\"") {
        emit(out, TokenKind::kStringLiteral, start, i + 3);
        return;
      }
      ++i;
    }
    warn(out, "unterminated text block");
    emit(out, TokenKind::kStringLiteral, start, src_.size());
  }

  void lex_number(TokenStream& out) {
    const std::size_t start = pos_;
    std::size_t i = start;
    while (i < src_.size()) {
      const char ch = src_[i];
      if (is_digit(ch) || (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
          ch == '_' || ch == '.') {
        const bool exponent = ch == 'e' || ch == 'E' || ch == 'p' || ch == 'P';
        ++i;
        if (exponent && i < src_.size() && (src_[i] == '+' || src_[i] == '-')) {
          ++i;
        }
        continue;
      }
      break;
    }
    emit(out, TokenKind::kNumberLiteral, start, i);
  }

  std::string_view src_;
  LanguageHint hint_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace detail

/// Lexes `source`. Throws InputError when the text is not valid UTF-8;
/// unterminated literals and comments only add a warning.
inline TokenStream tokenize(std::string_view source, LanguageHint hint) {
  if (!detail::valid_utf8(source)) {
    throw InputError("source is not valid UTF-8");
  }
  return detail::Lexer(source, hint).run();
}

/// Tokens on `line`, or nullopt for a line without tokens.
inline std::optional<TokenRange> line_token_range(const TokenStream& stream,
                                                  int line) {
  if (line < 1 || line > stream.line_count) {
    throw InputError("line " + std::to_string(line) + " out of range [1, " +
                     std::to_string(stream.line_count) + "]");
  }
  const auto& toks = stream.tokens;
  const auto lo = std::lower_bound(
      toks.begin(), toks.end(), line,
      [](const Token& t, int l) { return t.line < l; });
  if (lo == toks.end() || lo->line != line) return std::nullopt;
  const auto hi = std::upper_bound(
      lo, toks.end(), line, [](int l, const Token& t) { return l < t.line; });
  return TokenRange{static_cast<std::size_t>(lo - toks.begin()),
                    static_cast<std::size_t>(hi - toks.begin()) - 1};
}

/// Source text together with its token stream and line offsets.
struct Document {
  std::string path;
  std::string text;
  TokenStream stream;
  // Byte offset at which each line starts; index 0 is line 1.
  std::vector<std::size_t> line_starts;

  int line_count() const { return stream.line_count; }

  std::size_t line_start(int line) const {
    if (line > static_cast<int>(line_starts.size())) return text.size();
    return line_starts[static_cast<std::size_t>(line - 1)];
  }
};

inline Document make_document(std::string text, LanguageHint hint,
                              std::string path = {}) {
  Document doc;
  doc.path = std::move(path);
  doc.stream = tokenize(text, hint);
  doc.line_starts.push_back(0);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' && i + 1 < text.size()) doc.line_starts.push_back(i + 1);
  }
  doc.text = std::move(text);
  return doc;
}

}  // namespace codenat

#endif  // CODENAT_LEXER_HPP
