#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace s3s::verifier {

enum class TaskKind { Math, MultipleChoice };

enum class ProfileName { GSM8K, MATH500, ARC, TruthfulQA, Countdown, Sudoku, Custom };

// Per-profile component weights (struct, consist, reach, conf, ndegen) plus
// the task constraint weight. Rows sum to 1.
struct WeightProfile {
    double alpha[5] = {0, 0, 0, 0, 0};
    double alpha_c = 0.0;
    ProfileName name = ProfileName::Custom;

    TaskKind task_kind() const;
    void validate() const;
};

WeightProfile builtin_profile(ProfileName name);
WeightProfile profile_by_name(const std::string& name);
std::string profile_name(ProfileName name);
std::vector<ProfileName> all_profiles();

enum class AnswerKind { Numeric, Symbolic, Letter };

struct ExtractedAnswer {
    std::string text;
    AnswerKind kind = AnswerKind::Symbolic;
    std::optional<double> value;  // set for Numeric
    size_t delimiter_pos = 0;     // offset of the winning delimiter; reasoning prefix ends here
};

// Priority cascade: \boxed{} > <answer></answer> > #### > "answer is/=".
// Within a level the last match in the text wins.
std::optional<ExtractedAnswer> extract_answer(std::string_view text);

struct Equality {
    double a = 0, b = 0, c = 0;
    char op = '+';  // one of + - * /
    size_t begin = 0, end = 0;
};

// Explicit "a op b = c" statements in ASCII or LaTeX form. Compound
// parenthesized expressions are deliberately not handled.
std::vector<Equality> parse_equalities(std::string_view text);

// All decimal values appearing in the text, in order.
std::vector<double> scan_numbers(std::string_view text);

double s_struct(std::string_view text, TaskKind kind);
double s_consist(std::string_view text);
double s_reach(std::string_view text);
double s_conf(const std::optional<std::vector<double>>& confidences);
double s_ndegen(std::string_view text);
double s_ndegen(std::string_view text, const std::vector<std::string>& special_tokens,
                const std::string& mask_token);

double countdown_constraint(std::string_view text, std::string_view input_text);
double sudoku_constraint(std::string_view text, std::string_view input_text);
double mc_constraint(std::string_view text);

// Prompt plus optional per-token top-1 probabilities. Deliberately has no
// ground-truth field: labels are unreachable by construction.
struct ScoringContext {
    std::string input_text;
    std::optional<std::vector<double>> confidences;
    WeightProfile profile;
};

struct VerifierReport {
    double s_struct = 0, s_consist = 0, s_reach = 0, s_conf = 0, s_ndegen = 0;
    double s_constraint = 0;
    double composite = 0;
    std::string extracted_answer;  // empty when none
    int equalities_total = 0;
    int equalities_verified = 0;
};

VerifierReport score(std::string_view text, const ScoringContext& ctx);

}  // namespace s3s::verifier
