#include "fixcrew/lexer.hpp"

#include <cctype>

namespace fixcrew {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_cont(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_number_cont(char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'x' || c == 'X' ||
           (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

bool is_punctuation(char c) {
    switch (c) {
        case '(':
        case ')':
        case '[':
        case ']':
        case '{':
        case '}':
        case ';':
        case ',':
        case '.':
            return true;
        default:
            return false;
    }
}

}  // namespace

std::vector<Token> tokenize_code(std::string_view text) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (is_ident_start(c)) {
            size_t j = i + 1;
            while (j < n && is_ident_cont(text[j])) ++j;
            out.push_back({std::string(text.substr(i, j - i)), TokenKind::Identifier});
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i + 1;
            while (j < n && is_number_cont(text[j])) ++j;
            out.push_back({std::string(text.substr(i, j - i)), TokenKind::Number});
            i = j;
            continue;
        }
        if (c == '"' || c == '\'') {
            const char quote = c;
            size_t j = i + 1;
            while (j < n) {
                if (text[j] == '\n') break;  // unterminated: stop at end of line
                if (text[j] == '\\' && j + 1 < n && text[j + 1] != '\n') {
                    j += 2;
                    continue;
                }
                if (text[j] == quote) {
                    ++j;
                    break;
                }
                ++j;
            }
            out.push_back({std::string(text.substr(i, j - i)), TokenKind::StringLiteral});
            i = j;
            continue;
        }
        out.push_back({std::string(1, c),
                       is_punctuation(c) ? TokenKind::Punctuation : TokenKind::Operator});
        ++i;
    }
    return out;
}

std::vector<std::string> token_texts(std::string_view text) {
    auto toks = tokenize_code(text);
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (auto& t : toks) out.push_back(std::move(t.text));
    return out;
}

std::size_t token_count(std::string_view text) {
    return tokenize_code(text).size();
}

std::string_view token_kind_name(TokenKind kind) {
    switch (kind) {
        case TokenKind::Identifier: return "identifier";
        case TokenKind::Number: return "number";
        case TokenKind::StringLiteral: return "string_literal";
        case TokenKind::Operator: return "operator";
        case TokenKind::Punctuation: return "punctuation";
    }
    return "unknown";
}

}  // namespace fixcrew
