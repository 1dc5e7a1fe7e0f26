#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fixcrew {

enum class TokenKind { Identifier, Number, StringLiteral, Operator, Punctuation };

struct Token {
    std::string text;
    TokenKind kind;

    bool operator==(const Token&) const = default;
};

// Deterministic code lexer shared by corpus filtering, retrieval and metrics.
//
// Rules: identifiers/keywords are maximal [A-Za-z_$][A-Za-z0-9_$]* runs;
// numbers are maximal digit/dot/hex runs starting with a digit; string and
// char literals are single tokens honoring backslash escapes and never
// crossing a newline (an unterminated literal swallows the rest of its
// line); any other non-whitespace character is a single operator or
// punctuation token; whitespace is discarded. Total: never fails.
std::vector<Token> tokenize_code(std::string_view text);

// just the token texts, in order
std::vector<std::string> token_texts(std::string_view text);

std::size_t token_count(std::string_view text);

std::string_view token_kind_name(TokenKind kind);

}  // namespace fixcrew
