#include "spurdec/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace spurdec {

namespace {

class Parser {
  public:
    Parser(const std::string& text, const std::map<std::string, std::int64_t>& env)
        : text_(text), env_(env) {}

    std::int64_t run() {
        std::int64_t v = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("unexpected trailing input");
        }
        return v;
    }

  private:
    const std::string& text_;
    const std::map<std::string, std::int64_t>& env_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::invalid_argument("expression error at offset " + std::to_string(pos_) +
                                    " in \"" + text_ + "\": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool eat(const char* tok) {
        skip_ws();
        std::size_t len = std::char_traits<char>::length(tok);
        if (text_.compare(pos_, len, tok) != 0) {
            return false;
        }
        // Avoid eating "<" when the input is "<=", and similar prefix clashes.
        if ((tok[len - 1] == '<' || tok[len - 1] == '>' || tok[len - 1] == '=' ||
             tok[len - 1] == '!') &&
            pos_ + len < text_.size() && text_[pos_ + len] == '=') {
            return false;
        }
        pos_ += len;
        return true;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    std::int64_t parse_expr() { return parse_ternary(); }

    std::int64_t parse_ternary() {
        std::int64_t cond = parse_or();
        if (eat("?")) {
            std::int64_t then_v = parse_expr();
            skip_ws();
            if (!eat(":")) {
                fail("expected ':' in conditional");
            }
            std::int64_t else_v = parse_expr();
            return cond != 0 ? then_v : else_v;
        }
        return cond;
    }

    std::int64_t parse_or() {
        std::int64_t v = parse_and();
        while (eat("||")) {
            std::int64_t rhs = parse_and();
            v = (v != 0 || rhs != 0) ? 1 : 0;
        }
        return v;
    }

    std::int64_t parse_and() {
        std::int64_t v = parse_cmp();
        while (eat("&&")) {
            std::int64_t rhs = parse_cmp();
            v = (v != 0 && rhs != 0) ? 1 : 0;
        }
        return v;
    }

    std::int64_t parse_cmp() {
        std::int64_t v = parse_sum();
        if (eat("==")) {
            return v == parse_sum() ? 1 : 0;
        }
        if (eat("!=")) {
            return v != parse_sum() ? 1 : 0;
        }
        if (eat("<=")) {
            return v <= parse_sum() ? 1 : 0;
        }
        if (eat(">=")) {
            return v >= parse_sum() ? 1 : 0;
        }
        if (eat("<")) {
            return v < parse_sum() ? 1 : 0;
        }
        if (eat(">")) {
            return v > parse_sum() ? 1 : 0;
        }
        return v;
    }

    std::int64_t parse_sum() {
        std::int64_t v = parse_term();
        for (;;) {
            if (eat("+")) {
                v += parse_term();
            } else if (eat("-")) {
                v -= parse_term();
            } else {
                return v;
            }
        }
    }

    std::int64_t parse_term() {
        std::int64_t v = parse_unary();
        while (eat("*")) {
            v *= parse_unary();
        }
        return v;
    }

    std::int64_t parse_unary() {
        if (eat("!")) {
            return parse_unary() == 0 ? 1 : 0;
        }
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '-') {
            ++pos_;
            return -parse_unary();
        }
        return parse_primary();
    }

    std::int64_t parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("unexpected end of input");
        }
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            std::int64_t v = parse_expr();
            skip_ws();
            if (peek() != ')') {
                fail("expected ')'");
            }
            ++pos_;
            return v;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
            return std::strtoll(text_.substr(start, pos_ - start).c_str(), nullptr, 10);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            std::string name = text_.substr(start, pos_ - start);
            auto it = env_.find(name);
            if (it == env_.end()) {
                fail("unknown identifier '" + name + "'");
            }
            return it->second;
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

}  // namespace

std::int64_t evaluate_expression(const std::string& text,
                                 const std::map<std::string, std::int64_t>& env) {
    return Parser(text, env).run();
}

void check_expression(const std::string& text,
                      const std::map<std::string, std::int64_t>& env) {
    Parser(text, env).run();
}

}  // namespace spurdec
