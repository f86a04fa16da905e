#include "s3search/verifier.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

namespace s3s::verifier {

namespace {

// --- small string helpers (byte-based; safe on arbitrary input) -----------

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = lower(c);
    return out;
}

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) words.push_back(text.substr(i, j - i));
        i = j;
    }
    return words;
}

size_t count_occurrences(std::string_view text, std::string_view needle) {
    if (needle.empty()) return 0;
    size_t n = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

// Unsigned decimal at position i. Returns value and end offset, or nullopt.
std::optional<std::pair<double, size_t>> parse_unsigned(std::string_view text, size_t i) {
    size_t j = i;
    bool digits = false;
    while (j < text.size() && is_digit(text[j])) { ++j; digits = true; }
    if (j < text.size() && text[j] == '.' && j + 1 < text.size() && is_digit(text[j + 1])) {
        ++j;
        while (j < text.size() && is_digit(text[j])) ++j;
        digits = true;
    }
    if (!digits) return std::nullopt;
    return std::make_pair(std::stod(std::string(text.substr(i, j - i))), j);
}

std::optional<std::pair<double, size_t>> parse_signed(std::string_view text, size_t i) {
    bool neg = false;
    size_t j = i;
    if (j < text.size() && (text[j] == '-' || text[j] == '+')) {
        neg = text[j] == '-';
        ++j;
    }
    auto num = parse_unsigned(text, j);
    if (!num) return std::nullopt;
    return std::make_pair(neg ? -num->first : num->first, num->second);
}

size_t skip_spaces(std::string_view text, size_t i) {
    while (i < text.size() && is_space(text[i])) ++i;
    return i;
}

// Full-string strtod-style parse (entire residue must be consumed).
std::optional<double> parse_full_number(std::string_view s) {
    auto num = parse_signed(s, 0);
    if (num && num->second == s.size()) return num->first;
    return std::nullopt;
}

std::string strip_answer_token(std::string_view raw) {
    std::string s(raw);
    auto strip = [&](auto pred) {
        while (!s.empty() && pred(s.front())) s.erase(s.begin());
        while (!s.empty() && pred(s.back())) s.pop_back();
    };
    strip([](char c) { return is_space(c); });
    strip([](char c) { return c == '$' || c == '.' || c == ',' || c == ';' || c == ':' ||
                              c == '!' || c == '?' || c == '"' || c == '\'' || c == '*'; });
    // \text{...} wrapper
    if (s.rfind("\\text{", 0) == 0 && s.back() == '}') s = s.substr(6, s.size() - 7);
    if (!s.empty() && s.front() == '{' && s.back() == '}') s = s.substr(1, s.size() - 2);
    strip([](char c) { return is_space(c); });
    return s;
}

// --- answer extraction -----------------------------------------------------

std::optional<size_t> find_last(std::string_view text, std::string_view needle) {
    size_t pos = text.rfind(needle);
    if (pos == std::string_view::npos) return std::nullopt;
    return pos;
}

std::optional<size_t> find_last_ci(std::string_view text, std::string_view needle_lower) {
    std::string lowered = to_lower(text);
    return find_last(lowered, needle_lower);
}

ExtractedAnswer classify(std::string raw, size_t delimiter_pos) {
    ExtractedAnswer ans;
    ans.delimiter_pos = delimiter_pos;
    std::string s = strip_answer_token(raw);
    // strip thousands separators before the numeric attempt
    std::string digits = s;
    digits.erase(std::remove(digits.begin(), digits.end(), ','), digits.end());
    if (!digits.empty() && digits.back() == '%') digits.pop_back();
    if (auto v = parse_full_number(digits)) {
        ans.kind = AnswerKind::Numeric;
        ans.value = *v;
        ans.text = digits;
        return ans;
    }
    if (s.size() == 1) {
        char u = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
        if (u >= 'A' && u <= 'H') {
            ans.kind = AnswerKind::Letter;
            ans.text = std::string(1, u);
            return ans;
        }
    }
    ans.kind = AnswerKind::Symbolic;
    ans.text = s;
    return ans;
}

}  // namespace

std::optional<ExtractedAnswer> extract_answer(std::string_view text) {
    // Level 1: \boxed{...}
    if (auto pos = find_last(text, "\\boxed{")) {
        size_t i = *pos + 7;
        int depth = 1;
        size_t j = i;
        while (j < text.size() && depth > 0) {
            if (text[j] == '{') ++depth;
            else if (text[j] == '}') --depth;
            if (depth > 0) ++j;
        }
        std::string content = strip_answer_token(text.substr(i, j - i));
        if (!content.empty()) return classify(content, *pos);
    }
    // Level 2: <answer>...</answer>
    if (auto pos = find_last(text, "<answer>")) {
        size_t i = *pos + 8;
        size_t close = text.find("</answer>", i);
        size_t end = close == std::string_view::npos ? text.size() : close;
        std::string content = strip_answer_token(text.substr(i, end - i));
        if (!content.empty()) return classify(content, *pos);
    }
    // Level 3: ####
    if (auto pos = find_last(text, "####")) {
        size_t i = *pos + 4;
        size_t eol = text.find('\n', i);
        size_t end = eol == std::string_view::npos ? text.size() : eol;
        std::string content = strip_answer_token(text.substr(i, end - i));
        if (!content.empty()) return classify(content, *pos);
    }
    // Level 4: "answer is" / "answer ="
    {
        std::string lowered = to_lower(text);
        size_t best = std::string_view::npos;
        size_t content_at = 0;
        size_t pos = 0;
        while ((pos = lowered.find("answer", pos)) != std::string::npos) {
            size_t i = skip_spaces(lowered, pos + 6);
            bool matched = false;
            if (lowered.compare(i, 2, "is") == 0 && (i + 2 == lowered.size() || !is_alnum(lowered[i + 2]))) {
                i = skip_spaces(lowered, i + 2);
                matched = true;
            } else if (i < lowered.size() && lowered[i] == '=') {
                i = skip_spaces(lowered, i + 1);
                matched = true;
            }
            if (matched && i < text.size()) {
                best = pos;
                content_at = i;
            }
            pos += 6;
        }
        if (best != std::string_view::npos) {
            size_t j = content_at;
            while (j < text.size() && !is_space(text[j])) ++j;
            std::string content = strip_answer_token(text.substr(content_at, j - content_at));
            if (!content.empty()) return classify(content, best);
        }
    }
    return std::nullopt;
}

std::vector<double> scan_numbers(std::string_view text) {
    std::vector<double> out;
    size_t i = 0;
    while (i < text.size()) {
        if (is_digit(text[i]) || (text[i] == '.' && i + 1 < text.size() && is_digit(text[i + 1]))) {
            bool neg = false;
            if (i > 0 && text[i - 1] == '-' && (i < 2 || !is_digit(text[i - 2]))) neg = true;
            auto num = parse_unsigned(text, i);
            out.push_back(neg ? -num->first : num->first);
            i = num->second;
        } else {
            ++i;
        }
    }
    return out;
}

// --- equalities ------------------------------------------------------------

namespace {

// Operator at position i; returns (op, end-of-op) or nullopt.
std::optional<std::pair<char, size_t>> parse_op(std::string_view text, size_t i) {
    if (i >= text.size()) return std::nullopt;
    char c = text[i];
    if (c == '+') return std::make_pair('+', i + 1);
    if (c == '-') return std::make_pair('-', i + 1);
    if (c == '*') return std::make_pair('*', i + 1);
    if (c == '/') return std::make_pair('/', i + 1);
    // UTF-8 multiplication/division signs
    if (static_cast<unsigned char>(c) == 0xC3 && i + 1 < text.size()) {
        unsigned char d = static_cast<unsigned char>(text[i + 1]);
        if (d == 0x97) return std::make_pair('*', i + 2);
        if (d == 0xB7) return std::make_pair('/', i + 2);
    }
    if ((c == 'x' || c == 'X') && i > 0 && is_space(text[i - 1]) && i + 1 < text.size() &&
        is_space(text[i + 1])) {
        return std::make_pair('*', i + 1);
    }
    if (c == '\\') {
        if (text.compare(i, 6, "\\times") == 0) return std::make_pair('*', i + 6);
        if (text.compare(i, 5, "\\cdot") == 0) return std::make_pair('*', i + 5);
        if (text.compare(i, 4, "\\div") == 0) return std::make_pair('/', i + 4);
    }
    return std::nullopt;
}

size_t skip_dollar_spaces(std::string_view text, size_t i) {
    while (i < text.size() && (is_space(text[i]) || text[i] == '$')) ++i;
    return i;
}

// \frac{a}{b} = c
std::optional<Equality> parse_frac_equality(std::string_view text, size_t i) {
    if (text.compare(i, 6, "\\frac{") != 0) return std::nullopt;
    size_t j = skip_spaces(text, i + 6);
    auto a = parse_signed(text, j);
    if (!a) return std::nullopt;
    j = skip_spaces(text, a->second);
    if (j >= text.size() || text[j] != '}') return std::nullopt;
    j = skip_spaces(text, j + 1);
    if (j >= text.size() || text[j] != '{') return std::nullopt;
    j = skip_spaces(text, j + 1);
    auto b = parse_signed(text, j);
    if (!b) return std::nullopt;
    j = skip_spaces(text, b->second);
    if (j >= text.size() || text[j] != '}') return std::nullopt;
    j = skip_dollar_spaces(text, j + 1);
    if (j >= text.size() || text[j] != '=') return std::nullopt;
    j = skip_dollar_spaces(text, j + 1);
    auto c = parse_signed(text, j);
    if (!c) return std::nullopt;
    Equality eq{a->first, b->first, c->first, '/', i, c->second};
    return eq;
}

}  // namespace

std::vector<Equality> parse_equalities(std::string_view text) {
    std::vector<Equality> out;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '\\') {
            if (auto eq = parse_frac_equality(text, i)) {
                out.push_back(*eq);
                i = eq->end;
                continue;
            }
            ++i;
            continue;
        }
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        // reject continuations glued to an identifier or closing paren
        if (i > 0 && (is_alnum(text[i - 1]) || text[i - 1] == ')' || text[i - 1] == '.')) {
            auto num = parse_unsigned(text, i);
            i = num ? num->second : i + 1;
            continue;
        }
        auto a = parse_unsigned(text, i);
        size_t j = skip_spaces(text, a->second);
        auto op = parse_op(text, j);
        if (!op) { i = a->second; continue; }
        j = skip_dollar_spaces(text, op->second);
        auto b = parse_unsigned(text, j);
        if (!b) { i = a->second; continue; }
        j = skip_dollar_spaces(text, b->second);
        if (j >= text.size() || text[j] != '=') { i = a->second; continue; }
        j = skip_dollar_spaces(text, j + 1);
        auto c = parse_signed(text, j);
        if (!c) { i = a->second; continue; }
        out.push_back(Equality{a->first, b->first, c->first, op->first, i, c->second});
        i = c->second;
    }
    return out;
}

namespace {

std::optional<double> apply_op(double a, char op, double b) {
    switch (op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/': return b == 0.0 ? std::nullopt : std::optional<double>(a / b);
    }
    return std::nullopt;
}

// Values stated after '=' signs, in order (for the chain magnitude check).
std::vector<double> equation_chain_values(std::string_view text) {
    std::vector<double> out;
    size_t pos = 0;
    while ((pos = text.find('=', pos)) != std::string_view::npos) {
        size_t i = skip_dollar_spaces(text, pos + 1);
        if (auto v = parse_signed(text, i)) out.push_back(v->first);
        ++pos;
    }
    return out;
}

const std::vector<std::string>& math_keywords() {
    static const std::vector<std::string> kw = {
        "step",     "therefore", "thus",     "compute",  "calculate",
        "because",  "hence",     "so",       "answer",   "solve",
        "substitute", "simplify", "equation", "result"};
    return kw;
}

const std::vector<std::string>& mc_keywords() {
    // Justification vocabulary; "eliminat"/"reason"/"conclude" match as prefixes.
    static const std::vector<std::string> kw = {"because", "therefore", "thus",   "hence",
                                                "since",   "eliminat",  "reason", "implies",
                                                "conclude", "evidence"};
    return kw;
}

int distinct_keyword_hits(std::string_view text, const std::vector<std::string>& keywords,
                          bool prefix_match) {
    std::string lowered = to_lower(text);
    std::set<std::string> seen;
    size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && !is_alnum(lowered[i])) ++i;
        size_t j = i;
        while (j < lowered.size() && is_alnum(lowered[j])) ++j;
        if (j > i) {
            std::string_view word(lowered.data() + i, j - i);
            for (const auto& kw : keywords) {
                bool hit = prefix_match ? word.substr(0, kw.size()) == kw : word == kw;
                if (hit) seen.insert(kw);
            }
        }
        i = j;
    }
    return static_cast<int>(seen.size());
}

double alnum_density(std::string_view text) {
    if (text.empty()) return 0.0;
    size_t n = 0;
    for (char c : text) n += (is_alnum(c) || is_space(c)) ? 1 : 0;
    return static_cast<double>(n) / text.size();
}

std::optional<char> mc_letter(std::string_view text) {
    if (auto ans = extract_answer(text); ans && ans->kind == AnswerKind::Letter) {
        return ans->text[0];
    }
    std::string whole = strip_answer_token(text);
    if (whole.size() == 1) {
        char u = static_cast<char>(std::toupper(static_cast<unsigned char>(whole[0])));
        if (u >= 'A' && u <= 'H') return u;
    }
    std::optional<char> last;
    for (std::string_view w : split_words(text)) {
        std::string s = strip_answer_token(w);
        if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'H') last = s[0];
    }
    return last;
}

}  // namespace

double s_struct(std::string_view text, TaskKind kind) {
    double keyword = std::min(distinct_keyword_hits(text, math_keywords(), false) / 3.0, 1.0);
    double density = std::min(alnum_density(text) / 0.5, 1.0);
    if (kind == TaskKind::MultipleChoice) {
        double letter = mc_letter(text).has_value() ? 1.0 : 0.0;
        return 0.5 * letter + 0.25 * keyword + 0.25 * density;
    }
    double delimiter = extract_answer(text).has_value() ? 1.0 : 0.0;
    return 0.40 * keyword + 0.35 * delimiter + 0.25 * density;
}

namespace {

int count_verified(const std::vector<Equality>& eqs) {
    int verified = 0;
    std::optional<double> prev_stated, prev_true;
    for (const Equality& eq : eqs) {
        double tol = std::max(std::fabs(eq.c) * 1e-6, 1e-4);
        std::optional<double> r = apply_op(eq.a, eq.op, eq.b);
        bool ok = r && std::fabs(*r - eq.c) <= tol;
        // Chain-corrected operand: when this equality consumes the previous
        // stated result, judge it against the previous true value, so a
        // single upstream slip is charged once.
        if (!ok && prev_stated && prev_true && std::fabs(eq.a - *prev_stated) <= 1e-9) {
            std::optional<double> r2 = apply_op(*prev_true, eq.op, eq.b);
            ok = r2 && std::fabs(*r2 - eq.c) <= tol;
        }
        verified += ok ? 1 : 0;
        prev_stated = eq.c;
        prev_true = apply_op(eq.a, eq.op, eq.b);
    }
    return verified;
}

}  // namespace

double s_consist(std::string_view text) {
    std::vector<Equality> eqs = parse_equalities(text);
    if (eqs.empty()) return 0.5;  // neutral default
    double score = static_cast<double>(count_verified(eqs)) / eqs.size();
    std::vector<double> chain = equation_chain_values(text);
    for (size_t k = 0; k + 1 < chain.size(); ++k) {
        if (chain[k] == 0.0 || chain[k + 1] == 0.0) continue;
        double ratio = std::fabs(chain[k + 1] / chain[k]);
        if (ratio <= 1e-3 || ratio >= 1e3) {
            score *= 0.5;  // one penalty at most
            break;
        }
    }
    return score;
}

double s_reach(std::string_view text) {
    auto ans = extract_answer(text);
    if (!ans) return 0.2;
    std::string_view prefix = text.substr(0, ans->delimiter_pos);
    if (ans->kind == AnswerKind::Numeric) {
        for (double v : scan_numbers(prefix)) {
            if (std::fabs(v - *ans->value) <= 1e-6) return 1.0;
        }
        return 0.3;
    }
    if (ans->text.empty()) return 0.3;
    std::string lowered_prefix = to_lower(prefix);
    return lowered_prefix.find(to_lower(ans->text)) != std::string::npos ? 1.0 : 0.3;
}

double s_conf(const std::optional<std::vector<double>>& confidences) {
    if (!confidences || confidences->empty()) return 0.5;
    double sum = 0.0;
    for (double v : *confidences) {
        v = std::clamp(v, -100.0, 100.0);  // raw-score guard
        sum += std::clamp(v, 0.0, 1.0);
    }
    return sum / confidences->size();
}

double s_ndegen(std::string_view text) {
    static const std::vector<std::string> specials = {"<|endoftext|>", "<|eot_id|>"};
    return s_ndegen(text, specials, "<|mdm_mask|>");
}

double s_ndegen(std::string_view text, const std::vector<std::string>& special_tokens,
                const std::string& mask_token) {
    std::vector<std::string_view> words = split_words(text);
    const size_t n = words.size();
    if (n == 0) return 0.0;

    size_t special = 0;
    for (const auto& tok : special_tokens) special += count_occurrences(text, tok);
    if (static_cast<double>(special) / n > 0.20) return 0.0;
    if (static_cast<double>(count_occurrences(text, mask_token)) / n > 0.15) return 0.05;
    if (n < 8) return 0.2;

    if (n >= 12) {
        std::set<std::pair<std::string_view, std::string_view>> uniq;
        for (size_t i = 0; i + 1 < n; i += 2) uniq.insert({words[i], words[i + 1]});
        double rho2 = static_cast<double>(uniq.size()) / (n - 1);
        if (rho2 < 0.15) return 0.05;
        if (rho2 < 0.30) return 0.3;
    }
    if (n > 30) {
        std::set<std::tuple<std::string_view, std::string_view, std::string_view>> uniq;
        for (size_t i = 0; i + 2 < n; i += 3) uniq.insert({words[i], words[i + 1], words[i + 2]});
        double rho3 = static_cast<double>(uniq.size()) / (n - 2);
        if (rho3 < 0.25) return 0.2;
    }
    return 1.0;
}

// --- countdown -------------------------------------------------------------

namespace {

struct Evaluated {
    double value = 0.0;
    std::vector<double> operands;
};

struct ExprParser {
    std::string_view s;
    size_t i = 0;
    std::vector<double> operands;
    int depth = 0;
    bool failed = false;

    void skip() { i = skip_spaces(s, i); }

    std::optional<double> factor() {
        if (failed || ++depth > 64) { failed = true; return std::nullopt; }
        skip();
        if (i < s.size() && s[i] == '(') {
            ++i;
            auto v = expr();
            skip();
            if (!v || i >= s.size() || s[i] != ')') { failed = true; --depth; return std::nullopt; }
            ++i;
            --depth;
            return v;
        }
        if (i < s.size() && s[i] == '-') {
            ++i;
            auto v = factor();
            --depth;
            if (!v) return std::nullopt;
            return -*v;
        }
        auto num = parse_unsigned(s, i);
        --depth;
        if (!num) { failed = true; return std::nullopt; }
        i = num->second;
        operands.push_back(num->first);
        return num->first;
    }

    std::optional<double> term() {
        auto v = factor();
        if (!v) return std::nullopt;
        while (!failed) {
            skip();
            auto op = parse_op(s, i);
            if (!op || (op->first != '*' && op->first != '/')) break;
            i = op->second;
            auto rhs = factor();
            if (!rhs) return std::nullopt;
            auto r = apply_op(*v, op->first, *rhs);
            if (!r) { failed = true; return std::nullopt; }
            v = r;
        }
        return v;
    }

    std::optional<double> expr() {
        auto v = term();
        if (!v) return std::nullopt;
        while (!failed) {
            skip();
            auto op = parse_op(s, i);
            if (!op || (op->first != '+' && op->first != '-')) break;
            i = op->second;
            auto rhs = term();
            if (!rhs) return std::nullopt;
            v = apply_op(*v, op->first, *rhs);
        }
        return v;
    }
};

std::optional<Evaluated> evaluate_expression(std::string_view s) {
    ExprParser p{s};
    auto v = p.expr();
    p.skip();
    if (!v || p.failed || p.i != s.size()) return std::nullopt;
    if (p.operands.size() < 2) return std::nullopt;
    return Evaluated{*v, std::move(p.operands)};
}

// Maximal arithmetic-looking substrings, each evaluated if possible. A run
// containing '=' contributes its left-hand side.
std::vector<Evaluated> candidate_expressions(std::string_view text) {
    std::vector<Evaluated> out;
    size_t i = 0;
    auto is_expr_char = [&](size_t k, size_t& adv) {
        adv = 1;
        char c = text[k];
        if (is_digit(c) || c == '.' || c == '+' || c == '-' || c == '*' || c == '/' ||
            c == '(' || c == ')' || c == '=' || is_space(c)) {
            return true;
        }
        if (static_cast<unsigned char>(c) == 0xC3 && k + 1 < text.size()) {
            unsigned char d = static_cast<unsigned char>(text[k + 1]);
            if (d == 0x97 || d == 0xB7) { adv = 2; return true; }
        }
        return false;
    };
    while (i < text.size()) {
        size_t adv = 0;
        if (!is_expr_char(i, adv)) { ++i; continue; }
        size_t j = i;
        while (j < text.size()) {
            size_t step = 0;
            if (!is_expr_char(j, step)) break;
            j += step;
        }
        std::string_view run = text.substr(i, j - i);
        size_t eq = run.find('=');
        std::string_view body = eq == std::string_view::npos ? run : run.substr(0, eq);
        // trim
        size_t a = 0, b = body.size();
        while (a < b && !is_digit(body[a]) && body[a] != '(' && body[a] != '-') ++a;
        while (b > a && !is_digit(body[b - 1]) && body[b - 1] != ')') --b;
        if (b > a) {
            if (auto ev = evaluate_expression(body.substr(a, b - a))) out.push_back(std::move(*ev));
        }
        i = j;
    }
    return out;
}

struct CountdownPrompt {
    double target = 0.0;
    std::vector<double> pool;
};

std::optional<CountdownPrompt> parse_countdown_prompt(std::string_view input) {
    std::string lowered = to_lower(input);
    size_t tpos = lowered.find("target");
    size_t npos_ = lowered.find("numbers");
    if (tpos == std::string::npos || npos_ == std::string::npos) return std::nullopt;
    CountdownPrompt p;
    size_t i = lowered.find(':', tpos);
    if (i == std::string::npos) return std::nullopt;
    auto t = parse_signed(input, skip_spaces(input, i + 1));
    if (!t) return std::nullopt;
    p.target = t->first;
    i = lowered.find(':', npos_);
    if (i == std::string::npos) return std::nullopt;
    size_t j = i + 1;
    while (j < input.size()) {
        j = skip_spaces(input, j);
        if (j < input.size() && input[j] == ',') { ++j; continue; }
        auto v = parse_signed(input, j);
        if (!v) break;
        p.pool.push_back(v->first);
        j = v->second;
    }
    if (p.pool.empty()) return std::nullopt;
    return p;
}

bool operands_within_pool(const std::vector<double>& operands, std::vector<double> pool) {
    for (double o : operands) {
        bool found = false;
        for (size_t k = 0; k < pool.size(); ++k) {
            if (std::fabs(pool[k] - o) <= 1e-9) {
                pool.erase(pool.begin() + static_cast<long>(k));
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    return true;
}

}  // namespace

double countdown_constraint(std::string_view text, std::string_view input_text) {
    std::vector<Evaluated> candidates = candidate_expressions(text);
    auto prompt = parse_countdown_prompt(input_text);
    if (!prompt) return candidates.empty() ? 0.0 : 0.7;
    if (candidates.empty()) return 0.0;
    const Evaluated* best = &candidates[0];
    for (const Evaluated& c : candidates) {
        if (std::fabs(c.value - prompt->target) < std::fabs(best->value - prompt->target)) best = &c;
    }
    double gap = std::fabs(best->value - prompt->target);
    double target_sub = gap <= 1e-6 ? 0.6 : (gap <= 1.0 + 1e-9 ? 0.3 : 0.1);
    double valid_sub = operands_within_pool(best->operands, prompt->pool) ? 0.4 : 0.1;
    return target_sub + valid_sub;
}

// --- sudoku ----------------------------------------------------------------

namespace {

// First run of [0-9.] (whitespace allowed inside) holding >= 81 grid chars.
std::optional<std::vector<int>> parse_grid(std::string_view text, bool allow_dots) {
    std::vector<int> grid;
    size_t i = 0;
    while (i < text.size() && grid.size() < 81) {
        char c = text[i];
        if (is_digit(c)) {
            grid.push_back(c - '0');
            ++i;
        } else if (allow_dots && c == '.') {
            grid.push_back(0);
            ++i;
        } else if (is_space(c)) {
            ++i;
        } else {
            // non-grid character: restart unless we are mid-accumulation of a
            // promising run; for simplicity, keep accumulated digits only if
            // the run can still complete — here we just reset.
            if (!grid.empty() && grid.size() < 81) grid.clear();
            ++i;
        }
    }
    if (grid.size() < 81) return std::nullopt;
    grid.resize(81);
    return grid;
}

int satisfied_sudoku_constraints(const std::vector<int>& grid) {
    auto all_distinct_1_9 = [&](const int* idx) {
        unsigned seen = 0;
        for (int k = 0; k < 9; ++k) {
            int v = grid[idx[k]];
            if (v < 1 || v > 9) return false;
            unsigned bit = 1u << v;
            if (seen & bit) return false;
            seen |= bit;
        }
        return true;
    };
    int satisfied = 0;
    int idx[9];
    for (int r = 0; r < 9; ++r) {
        for (int k = 0; k < 9; ++k) idx[k] = r * 9 + k;
        satisfied += all_distinct_1_9(idx) ? 1 : 0;
    }
    for (int c = 0; c < 9; ++c) {
        for (int k = 0; k < 9; ++k) idx[k] = k * 9 + c;
        satisfied += all_distinct_1_9(idx) ? 1 : 0;
    }
    for (int b = 0; b < 9; ++b) {
        int r0 = (b / 3) * 3, c0 = (b % 3) * 3;
        for (int k = 0; k < 9; ++k) idx[k] = (r0 + k / 3) * 9 + (c0 + k % 3);
        satisfied += all_distinct_1_9(idx) ? 1 : 0;
    }
    return satisfied;
}

}  // namespace

double sudoku_constraint(std::string_view text, std::string_view input_text) {
    auto grid = parse_grid(text, false);
    if (!grid) return 0.0;
    double constraint_frac = satisfied_sudoku_constraints(*grid) / 27.0;

    double clue_sub = 1.0;  // vacuous when the prompt carries no clue string
    if (auto clues = parse_grid(input_text, true)) {
        int given = 0, kept = 0;
        for (int k = 0; k < 81; ++k) {
            if ((*clues)[k] != 0) {
                ++given;
                kept += (*grid)[k] == (*clues)[k] ? 1 : 0;
            }
        }
        if (given > 0) clue_sub = static_cast<double>(kept) / given;
    }
    return 0.75 * constraint_frac + 0.25 * clue_sub;
}

double mc_constraint(std::string_view text) {
    double score = 0.0;
    std::optional<char> letter = mc_letter(text);
    if (letter) score += 0.3;
    score += std::min(distinct_keyword_hits(text, mc_keywords(), true) / 3.0, 1.0) * 0.3;
    if (letter) {
        // The chosen letter must appear standalone at least as often as any
        // other letter; a single occurrence is dominant vacuously.
        int counts[8] = {0};
        for (std::string_view w : split_words(text)) {
            std::string s = strip_answer_token(w);
            if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'H') ++counts[s[0] - 'A'];
        }
        int mine = counts[*letter - 'A'];
        bool dominant = true;
        for (int k = 0; k < 8; ++k) {
            if (k != *letter - 'A' && counts[k] > mine) dominant = false;
        }
        if (dominant) score += 0.2;
    }
    if (text.size() >= 30) score += 0.2;
    return std::min(score, 1.0);
}

// --- profiles and composite -------------------------------------------------

TaskKind WeightProfile::task_kind() const {
    return (name == ProfileName::ARC || name == ProfileName::TruthfulQA)
               ? TaskKind::MultipleChoice
               : TaskKind::Math;
}

void WeightProfile::validate() const {
    double sum = alpha_c;
    for (double a : alpha) {
        if (a < 0) throw std::invalid_argument("profile: negative weight");
        sum += a;
    }
    if (alpha_c < 0) throw std::invalid_argument("profile: negative constraint weight");
    if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("profile: weights must sum to 1");
}

WeightProfile builtin_profile(ProfileName name) {
    WeightProfile p;
    p.name = name;
    switch (name) {
        case ProfileName::GSM8K:      p = {{0.20, 0.25, 0.25, 0.10, 0.20}, 0.00, name}; break;
        case ProfileName::MATH500:    p = {{0.25, 0.20, 0.25, 0.10, 0.20}, 0.00, name}; break;
        case ProfileName::ARC:        p = {{0.20, 0.00, 0.00, 0.15, 0.20}, 0.45, name}; break;
        case ProfileName::TruthfulQA: p = {{0.20, 0.00, 0.00, 0.15, 0.20}, 0.45, name}; break;
        case ProfileName::Countdown:  p = {{0.15, 0.10, 0.10, 0.10, 0.15}, 0.40, name}; break;
        case ProfileName::Sudoku:     p = {{0.05, 0.00, 0.00, 0.05, 0.10}, 0.80, name}; break;
        case ProfileName::Custom:     p = {{0.20, 0.25, 0.25, 0.10, 0.15}, 0.05, name}; break;
    }
    p.validate();
    return p;
}

std::string profile_name(ProfileName name) {
    switch (name) {
        case ProfileName::GSM8K:      return "gsm8k";
        case ProfileName::MATH500:    return "math500";
        case ProfileName::ARC:        return "arc";
        case ProfileName::TruthfulQA: return "truthfulqa";
        case ProfileName::Countdown:  return "countdown";
        case ProfileName::Sudoku:     return "sudoku";
        case ProfileName::Custom:     return "custom";
    }
    throw std::logic_error("unreachable");
}

WeightProfile profile_by_name(const std::string& name) {
    for (ProfileName p : all_profiles()) {
        if (profile_name(p) == name) return builtin_profile(p);
    }
    throw std::invalid_argument("unknown verifier profile: " + name);
}

std::vector<ProfileName> all_profiles() {
    return {ProfileName::GSM8K,      ProfileName::MATH500, ProfileName::ARC,
            ProfileName::TruthfulQA, ProfileName::Countdown, ProfileName::Sudoku,
            ProfileName::Custom};
}

VerifierReport score(std::string_view text, const ScoringContext& ctx) {
    const WeightProfile& p = ctx.profile;
    VerifierReport r;
    r.s_struct = s_struct(text, p.task_kind());
    r.s_consist = s_consist(text);
    r.s_reach = s_reach(text);
    r.s_conf = s_conf(ctx.confidences);
    r.s_ndegen = s_ndegen(text);

    if (p.alpha_c > 0.0) {
        switch (p.name) {
            case ProfileName::ARC:
            case ProfileName::TruthfulQA:
                r.s_constraint = mc_constraint(text);
                break;
            case ProfileName::Countdown:
                r.s_constraint = countdown_constraint(text, ctx.input_text);
                break;
            case ProfileName::Sudoku:
                r.s_constraint = sudoku_constraint(text, ctx.input_text);
                break;
            case ProfileName::Custom: {
                // integer-range bonus: extracted answer is an integer in [0, 999]
                auto ans = extract_answer(text);
                bool in_range = ans && ans->kind == AnswerKind::Numeric &&
                                std::fabs(*ans->value - std::round(*ans->value)) <= 1e-9 &&
                                *ans->value >= 0 && *ans->value <= 999;
                r.s_constraint = in_range ? 1.0 : 0.0;
                break;
            }
            default:
                r.s_constraint = 0.0;
        }
    }

    auto eqs = parse_equalities(text);
    r.equalities_total = static_cast<int>(eqs.size());
    r.equalities_verified = count_verified(eqs);
    if (auto ans = extract_answer(text)) r.extracted_answer = ans->text;

    r.composite = p.alpha[0] * r.s_struct + p.alpha[1] * r.s_consist + p.alpha[2] * r.s_reach +
                  p.alpha[3] * r.s_conf + p.alpha[4] * r.s_ndegen + p.alpha_c * r.s_constraint;
    return r;
}

}  // namespace s3s::verifier
