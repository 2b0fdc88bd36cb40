#include "queryback/prompting.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "queryback/error.hpp"
#include "queryback/text.hpp"

namespace queryback {

void validate(const PromptSpec& spec) {
    if (spec.exemplars.empty()) {
        throw ContractViolation("prompt spec needs at least one exemplar");
    }
    if (spec.query_label.empty() || spec.answer_label.empty()) {
        throw ContractViolation("prompt labels must be nonempty");
    }
    for (size_t i = 0; i < spec.exemplars.size(); ++i) {
        const auto& ex = spec.exemplars[i];
        if (text::trim(ex.query).empty() || text::trim(ex.answer).empty()) {
            throw ContractViolation("exemplar " + std::to_string(i) +
                                    " has a blank query or answer");
        }
    }
}

namespace {

// "<label> <content>"; inputs are trimmed, internal newlines preserved.
void append_field(std::string& out, const std::string& label, const std::string& content) {
    out += label;
    out += ' ';
    out += text::trim(content);
}

std::string render(const PromptSpec& spec, const std::string& lead_content) {
    std::string out;
    for (size_t i = 0; i < spec.exemplars.size(); ++i) {
        if (i > 0) out += spec.pair_separator;
        append_field(out, spec.query_label, spec.exemplars[i].query);
        out += spec.field_separator;
        append_field(out, spec.answer_label, spec.exemplars[i].answer);
    }
    out += spec.pair_separator;
    append_field(out, spec.query_label, lead_content);
    out += spec.field_separator;
    out += spec.answer_label;
    return out;
}

}  // namespace

std::string render_forward(const PromptSpec& spec, const std::string& query) {
    validate(spec);
    if (text::trim(query).empty()) {
        throw ContractViolation("render_forward: empty query");
    }
    return render(spec, query);
}

PromptSpec reverse_exemplars(const PromptSpec& spec) {
    validate(spec);
    PromptSpec reversed = spec;
    for (auto& ex : reversed.exemplars) {
        std::swap(ex.query, ex.answer);
    }
    std::swap(reversed.query_label, reversed.answer_label);
    return reversed;
}

std::string render_backward(const PromptSpec& spec, const std::string& answer) {
    validate(spec);
    if (text::trim(answer).empty()) {
        throw ContractViolation("render_backward: empty answer");
    }
    return render(reverse_exemplars(spec), answer);
}

std::string truncate_completion(const std::string& completion, const PromptSpec& spec) {
    size_t cut = completion.size();
    for (const auto& label : {spec.query_label, spec.answer_label}) {
        size_t pos = completion.find(label);
        if (pos != std::string::npos && pos < cut) cut = pos;
    }
    return text::trim(completion.substr(0, cut));
}

const std::string kSupportJudgmentQuestion =
    "Is the sentence above supported by the context? Answer Yes or No.";

std::string render_support_judgment(const std::string& context, const std::string& sentence) {
    std::string out = "Context: ";
    out += text::trim(context);
    out += "\n\nSentence: ";
    out += text::trim(sentence);
    out += "\n\n";
    out += kSupportJudgmentQuestion;
    out += "\nAnswer:";
    return out;
}

TaskKind task_from_string(const std::string& s) {
    const std::string k = text::to_lower(s);
    if (k == "movies") return TaskKind::Movies;
    if (k == "books") return TaskKind::Books;
    if (k == "gci") return TaskKind::Gci;
    if (k == "custom" || k == "synthetic") return TaskKind::Custom;
    throw ContractViolation("unknown task: " + s);
}

std::string to_string(TaskKind task) {
    switch (task) {
        case TaskKind::Movies: return "movies";
        case TaskKind::Books: return "books";
        case TaskKind::Gci: return "gci";
        case TaskKind::Custom: return "custom";
    }
    return "custom";
}

TaskTemplate default_task_template(TaskKind task) {
    switch (task) {
        case TaskKind::Movies:
            return {task, "What actors played in the {year} movie {title}?"};
        case TaskKind::Books:
            return {task, "Who is the author of the book {title}, what year was it published?"};
        case TaskKind::Gci:
            return {task, "What is the capital of {country}?"};
        case TaskKind::Custom:
            return {task, ""};
    }
    return {task, ""};
}

std::string render_query(const TaskTemplate& tmpl,
                         const std::map<std::string, std::string>& fields) {
    const std::string& pattern = tmpl.query_pattern;
    if (pattern.empty()) {
        throw ContractViolation("task template has no query pattern");
    }
    std::string out;
    out.reserve(pattern.size());
    size_t i = 0;
    while (i < pattern.size()) {
        if (pattern[i] != '{') {
            out.push_back(pattern[i]);
            ++i;
            continue;
        }
        size_t close = pattern.find('}', i);
        if (close == std::string::npos) {
            throw ContractViolation("unterminated placeholder in query pattern: " + pattern);
        }
        const std::string key = pattern.substr(i + 1, close - i - 1);
        auto it = fields.find(key);
        if (it == fields.end()) {
            throw ContractViolation("query pattern placeholder {" + key +
                                    "} has no matching record field");
        }
        out += it->second;
        i = close + 1;
    }
    return out;
}

PromptFile load_prompt_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open prompt file: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(path + ": " + ex.what());
    }
    PromptFile file;
    file.spec.query_label = doc.value("query_label", file.spec.query_label);
    file.spec.answer_label = doc.value("answer_label", file.spec.answer_label);
    file.spec.pair_separator = doc.value("pair_separator", file.spec.pair_separator);
    file.spec.field_separator = doc.value("field_separator", file.spec.field_separator);
    file.query_pattern = doc.value("query_pattern", std::string{});
    if (!doc.contains("exemplars") || !doc["exemplars"].is_array()) {
        throw ConfigError(path + ": missing \"exemplars\" array");
    }
    for (const auto& ex : doc["exemplars"]) {
        if (!ex.contains("query") || !ex.contains("answer")) {
            throw ConfigError(path + ": exemplar entries need \"query\" and \"answer\"");
        }
        file.spec.exemplars.push_back(
            {ex["query"].get<std::string>(), ex["answer"].get<std::string>()});
    }
    validate(file.spec);
    return file;
}

}  // namespace queryback
