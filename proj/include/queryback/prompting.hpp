#pragma once

#include <map>
#include <string>
#include <vector>

namespace queryback {

/// One (query, answer) demonstration pair. Both sides must be nonempty after
/// trimming.
struct FewShotExemplar {
    std::string query;
    std::string answer;

    friend bool operator==(const FewShotExemplar&, const FewShotExemplar&) = default;
};

/// An ordered few-shot prompt plus the strings used to render it to text.
/// The separators are configurable because the original task prompts do not
/// pin them down; the defaults are frozen by golden-file tests.
struct PromptSpec {
    std::vector<FewShotExemplar> exemplars;
    std::string query_label = "Query:";
    std::string answer_label = "Answer:";
    std::string pair_separator = "\n\n";
    std::string field_separator = "\n";

    friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

/// Throws ContractViolation when the spec has no exemplars, an exemplar side
/// is blank, or a label is empty.
void validate(const PromptSpec& spec);

/// Renders exemplars in order as (query_label q_i, answer_label a_i) blocks,
/// then the new query, ending with the answer label so a completion model
/// fills in the answer slot:
///
///   Query: q1
///   Answer: a1
///
///   Query: Q
///   Answer:
std::string render_forward(const PromptSpec& spec, const std::string& query);

/// Swaps each exemplar to (a_i, q_i), preserving order, and swaps the labels
/// so answers are introduced by the answer label. Involution: applying it
/// twice restores the input.
PromptSpec reverse_exemplars(const PromptSpec& spec);

/// Renders the reversed prompt with the generated answer on top, ending with
/// the query label so the model emits a query.
std::string render_backward(const PromptSpec& spec, const std::string& answer);

/// Cuts a model completion at the point where it starts a new exemplar block
/// (first occurrence of either label), then trims. Completion models commonly
/// overrun into further exemplars.
std::string truncate_completion(const std::string& completion, const PromptSpec& spec);

/// Marker line of the yes/no support-judgment prompt used by the
/// consistency-sampling baseline. The simulated model recognizes it.
extern const std::string kSupportJudgmentQuestion;

/// Renders the judge prompt asking whether `sentence` is supported by
/// `context`, ending positioned for a Yes/No completion.
std::string render_support_judgment(const std::string& context, const std::string& sentence);

/// Known task shapes for query construction.
enum class TaskKind {
    Movies,
    Books,
    Gci,
    Custom,
};

TaskKind task_from_string(const std::string& s);
std::string to_string(TaskKind task);

/// A query pattern with {field} placeholders resolved from dataset record
/// fields, e.g. "What is the capital of {country}?".
struct TaskTemplate {
    TaskKind name = TaskKind::Custom;
    std::string query_pattern;
};

/// Built-in patterns for the three tasks.
TaskTemplate default_task_template(TaskKind task);

/// Substitutes every {field} placeholder from `fields`. Throws
/// ContractViolation if a placeholder has no matching field.
std::string render_query(const TaskTemplate& tmpl,
                         const std::map<std::string, std::string>& fields);

/// Loads labels, separators, query pattern and exemplars from a JSON file:
///   {"query_label": ..., "answer_label": ..., "pair_separator": ...,
///    "field_separator": ..., "query_pattern": ..., "exemplars": [{"query":..., "answer":...}]}
/// All keys except "exemplars" are optional and fall back to the defaults.
struct PromptFile {
    PromptSpec spec;
    std::string query_pattern;  // empty when the file does not define one
};

PromptFile load_prompt_file(const std::string& path);

}  // namespace queryback
