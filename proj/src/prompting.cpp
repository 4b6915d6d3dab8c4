#include "introplan/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "introplan/errors.hpp"
#include "introplan/rng.hpp"

namespace introplan::prompting {

namespace {

std::string rtrim(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
        s.pop_back();
    }
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    std::string current;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            if (!current.empty()) {
                blocks.push_back(rtrim(current));
                current.clear();
            }
            continue;
        }
        current += line;
        current += '\n';
    }
    if (!current.empty()) blocks.push_back(rtrim(current));
    return blocks;
}

std::string substitute(const std::string& text, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out += text.substr(pos);
            break;
        }
        std::size_t close = text.find("}}", open);
        if (close == std::string::npos) {
            throw Error("template: unterminated placeholder near '" + text.substr(open, 20) + "'");
        }
        out += text.substr(pos, open - pos);
        std::string key = text.substr(open + 2, close - open - 2);
        auto it = vars.find(key);
        if (it == vars.end()) throw Error("template: no binding for placeholder {{" + key + "}}");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

}  // namespace

std::string to_string(TemplateName name) {
    switch (name) {
        case TemplateName::option_gen: return "option_gen";
        case TemplateName::knowledge_gen: return "knowledge_gen";
        case TemplateName::inference: return "inference";
        case TemplateName::next_token: return "next_token";
        case TemplateName::multilabel_query: return "multilabel_query";
    }
    throw Error("unreachable template name");
}

PromptTemplate PromptTemplate::parse(TemplateName name, const std::string& file_text) {
    PromptTemplate t;
    t.name_ = name;
    auto blocks = split_blocks(file_text);
    if (blocks.empty()) throw SchemaError("template " + to_string(name) + " is empty");

    // Block 0 is the preamble; a trailing {{safety}} line marks where the
    // safety sentence goes in safety mode.
    std::string preamble = blocks.front();
    const std::string slot = "{{safety}}";
    auto slot_pos = preamble.find(slot);
    if (slot_pos != std::string::npos) {
        t.has_safety_slot_ = true;
        preamble.erase(slot_pos, slot.size());
        preamble = rtrim(preamble);
    }
    t.preamble_ = preamble;
    t.blocks_.emplace_back(BlockKind::preamble, preamble);

    for (std::size_t i = 1; i < blocks.size(); ++i) {
        const bool has_placeholder = blocks[i].find("{{") != std::string::npos;
        if (!has_placeholder && blocks[i].rfind("Scene:", 0) == 0) {
            t.exemplars_.push_back(blocks[i]);
            t.blocks_.emplace_back(BlockKind::exemplar, blocks[i]);
        } else {
            t.blocks_.emplace_back(BlockKind::placeholder, blocks[i]);
        }
    }
    return t;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& vars, bool safety_mode,
                                   const std::string& safety_sentence, int exemplar_limit) const {
    std::string out;
    int exemplars_used = 0;
    for (const auto& [kind, text] : blocks_) {
        std::string rendered;
        switch (kind) {
            case BlockKind::preamble:
                rendered = text;
                if (safety_mode && has_safety_slot_) {
                    rendered += "\n" + trim(safety_sentence);
                }
                break;
            case BlockKind::exemplar:
                if (exemplar_limit >= 0 && exemplars_used >= exemplar_limit) continue;
                ++exemplars_used;
                rendered = text;
                break;
            case BlockKind::placeholder:
                rendered = substitute(text, vars);
                break;
        }
        if (!out.empty()) out += "\n\n";
        out += rendered;
    }
    return rtrim(out);
}

TemplateSet TemplateSet::load(const std::string& dir) {
    auto read_file = [&](const std::string& filename) {
        std::ifstream in(dir + "/" + filename);
        if (!in) throw SchemaError("cannot open template file '" + dir + "/" + filename + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    static const std::vector<std::pair<TemplateName, std::string>> files = {
        {TemplateName::option_gen, "option_gen.txt"},
        {TemplateName::knowledge_gen, "knowledge_gen.txt"},
        {TemplateName::inference, "inference.txt"},
        {TemplateName::next_token, "next_token.txt"},
        {TemplateName::multilabel_query, "multilabel_query.txt"},
    };

    TemplateSet set;
    std::uint64_t hash = rng::fnv1a64("introplan-templates-v1");
    for (const auto& [name, filename] : files) {
        auto text = read_file(filename);
        hash = rng::splitmix64(hash ^ rng::fnv1a64(filename));
        hash = rng::splitmix64(hash ^ rng::fnv1a64(text));
        set.templates_.emplace(name, PromptTemplate::parse(name, text));
    }
    auto sentence = read_file("safety_sentence.txt");
    hash = rng::splitmix64(hash ^ rng::fnv1a64(sentence));
    set.safety_sentence_ = trim(sentence);
    if (set.safety_sentence_.empty()) {
        throw SchemaError("safety_sentence.txt is empty");
    }
    set.version_ = rng::to_hex(hash);
    return set;
}

const PromptTemplate& TemplateSet::get(TemplateName name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error("template set missing " + to_string(name));
    return it->second;
}

std::string options_block(const std::vector<PlanOption>& options) {
    std::string out;
    for (const auto& o : options) {
        out += o.label.str() + ") " + o.text + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string letters_string(const LabelSet& labels) {
    std::string out;
    for (const auto& l : labels) {
        if (!out.empty()) out += ", ";
        out += l.letter();
    }
    return out;
}

std::string render_exemplar_block(const ExemplarBlock& exemplar) {
    return "Scene: " + exemplar.scene + "\nTask: " + exemplar.task + "\nOptions:\n" +
           options_block(exemplar.options) + "\nExplain: " + exemplar.rationale +
           "\nPrediction: " + letters_string(exemplar.prediction);
}

std::string render_option_gen_prompt(const Scenario& s, const TemplateSet& templates,
                                     const RenderOptions& opts) {
    return templates.get(TemplateName::option_gen)
        .render({{"scene", s.scene}, {"task", s.instruction}}, opts.safety_mode,
                templates.safety_sentence(), opts.exemplar_limit);
}

std::string render_knowledge_gen_prompt(const Scenario& s, const std::vector<PlanOption>& candidates,
                                        const LabelSet& valid_labels, const TemplateSet& templates,
                                        const RenderOptions& opts) {
    if (valid_labels.empty()) {
        throw PreconditionError("render_knowledge_gen_prompt: empty valid set");
    }
    LabelSet candidate_labels;
    for (const auto& o : candidates) candidate_labels.insert(o.label);
    for (const auto& l : valid_labels) {
        if (!candidate_labels.count(l)) {
            throw PreconditionError("render_knowledge_gen_prompt: valid label " + l.str() +
                                    " is not a candidate");
        }
    }
    return templates.get(TemplateName::knowledge_gen)
        .render({{"scene", s.scene},
                 {"task", s.instruction},
                 {"options", options_block(candidates)},
                 {"valid", letters_string(valid_labels)}},
                opts.safety_mode, templates.safety_sentence(), opts.exemplar_limit);
}

std::string render_inference_prompt(const Scenario& s, const std::vector<ExemplarBlock>& exemplars,
                                    const TemplateSet& templates, const RenderOptions& opts) {
    if (exemplars.empty()) {
        throw PreconditionError("render_inference_prompt: at least one exemplar required");
    }
    std::string joined;
    for (const auto& e : exemplars) {
        if (!joined.empty()) joined += "\n\n";
        joined += render_exemplar_block(e);
    }
    return templates.get(TemplateName::inference)
        .render({{"exemplars", joined}, {"scene", s.scene}, {"task", s.instruction}},
                opts.safety_mode, templates.safety_sentence(), opts.exemplar_limit);
}

std::string render_next_token_prompt(const Scenario& s, const std::vector<PlanOption>& options,
                                     const std::string& rationale, const TemplateSet& templates,
                                     const RenderOptions& opts) {
    if (options.empty()) throw PreconditionError("render_next_token_prompt: no options");
    if (trim(rationale).empty()) {
        throw PreconditionError("render_next_token_prompt: rationale is required");
    }
    return templates.get(TemplateName::next_token)
        .render({{"scene", s.scene},
                 {"task", s.instruction},
                 {"options", options_block(options)},
                 {"rationale", rationale}},
                opts.safety_mode, templates.safety_sentence(), opts.exemplar_limit);
}

std::string render_multilabel_query(const LabelSet& subset, const Scenario& s,
                                    const std::vector<PlanOption>& options,
                                    const std::string& rationale, const TemplateSet& templates,
                                    const RenderOptions& opts) {
    if (subset.empty()) throw PreconditionError("render_multilabel_query: empty subset");
    LabelSet candidate_labels;
    for (const auto& o : options) candidate_labels.insert(o.label);
    for (const auto& l : subset) {
        if (!candidate_labels.count(l)) {
            throw PreconditionError("render_multilabel_query: label " + l.str() +
                                    " is not a candidate");
        }
    }
    return templates.get(TemplateName::multilabel_query)
        .render({{"scene", s.scene},
                 {"task", s.instruction},
                 {"options", options_block(options)},
                 {"rationale", rationale},
                 {"subset", label_set_to_string(subset)}},
                opts.safety_mode, templates.safety_sentence(), opts.exemplar_limit);
}

namespace {

bool is_option_line(const std::string& line, char* letter, std::string* text) {
    auto t = trim(line);
    if (t.size() < 2 || t[0] < 'A' || t[0] > 'Z' || t[1] != ')') return false;
    *letter = t[0];
    *text = trim(t.substr(2));
    return true;
}

bool is_prediction_line(const std::string& line, std::string* content) {
    auto t = trim(line);
    for (const char* marker : {"Prediction:", "Correct Action(s):", "Correct Actions(s):"}) {
        if (t.rfind(marker, 0) == 0) {
            *content = t.substr(std::string(marker).size());
            return true;
        }
    }
    return false;
}

LabelSet parse_letter_list(const std::string& content) {
    LabelSet letters;
    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        bool isolated =
            (i == 0 || !std::isalpha(static_cast<unsigned char>(content[i - 1]))) &&
            (i + 1 == content.size() || !std::isalpha(static_cast<unsigned char>(content[i + 1])));
        if (c >= 'A' && c <= 'Z' && isolated) letters.insert(OptionLabel(c));
    }
    return letters;
}

}  // namespace

InferenceOutput parse_inference_output(const std::string& text) {
    InferenceOutput out;
    std::istringstream in(text);
    std::string line;
    enum class State { options, rationale, done } state = State::options;
    std::string rationale;
    bool have_prediction = false;

    while (std::getline(in, line) && state != State::done) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        char letter;
        std::string option_text;
        std::string marker_content;
        switch (state) {
            case State::options:
                if (is_option_line(line, &letter, &option_text)) {
                    PlanOption o;
                    o.label = OptionLabel(letter);
                    o.text = option_text;
                    o.is_escape = lower(option_text) == kEscapeOptionText;
                    if (o.is_escape) o.text = kEscapeOptionText;
                    out.options.push_back(std::move(o));
                } else if (trim(line).rfind("Explain:", 0) == 0) {
                    rationale = trim(trim(line).substr(8));
                    state = State::rationale;
                } else if (is_prediction_line(line, &marker_content)) {
                    // Answer without an Explain paragraph; recorded so the
                    // error below names the real gap.
                    out.direct_labels = parse_letter_list(marker_content);
                    have_prediction = true;
                    state = State::done;
                }
                break;
            case State::rationale:
                if (is_prediction_line(line, &marker_content)) {
                    out.direct_labels = parse_letter_list(marker_content);
                    have_prediction = true;
                    state = State::done;
                } else {
                    if (!rationale.empty()) rationale += "\n";
                    rationale += rtrim(line);
                }
                break;
            case State::done:
                break;
        }
    }

    if (out.options.empty()) {
        throw ParseError("inference output has no lettered options", text);
    }
    if (!have_prediction) {
        throw ParseError("inference output has no Prediction line", text);
    }
    out.rationale = trim(rationale);
    if (out.rationale.empty()) {
        throw ParseError("inference output has no Explain paragraph", text);
    }
    if (out.direct_labels.empty()) {
        throw ParseError("Prediction line names no option letters", text);
    }
    LabelSet option_labels;
    for (const auto& o : out.options) option_labels.insert(o.label);
    for (const auto& l : out.direct_labels) {
        if (!option_labels.count(l)) {
            throw ParseError("predicted label " + l.str() + " is not among the listed options",
                             text);
        }
    }
    return out;
}

std::vector<PlanOption> parse_option_lines(const std::string& text) {
    std::vector<std::string> texts;
    bool saw_escape = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.rfind("Explain:", 0) == 0) break;
        char letter;
        std::string option_text;
        if (!is_option_line(line, &letter, &option_text)) continue;
        if (lower(option_text) == kEscapeOptionText) {
            if (saw_escape) continue;  // drop duplicate escape lines
            saw_escape = true;
            option_text = kEscapeOptionText;
        }
        texts.push_back(option_text);
    }
    if (texts.empty()) return {};
    return assign_labels(texts);
}

}  // namespace introplan::prompting
