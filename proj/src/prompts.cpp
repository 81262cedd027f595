#include "finharness/prompts.hpp"

#include <json.hpp>

namespace finharness {

namespace {

constexpr std::string_view kInstruction = "{instruction}";
constexpr std::string_view kInput = "{input}";
constexpr std::string_view kChoices = "{choices}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_ident_byte(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_'; }

// Every `{ident}` token in `text` must be one of `allowed`.
void check_placeholders(std::string_view text, std::initializer_list<std::string_view> allowed, std::string_view what) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    std::size_t end = open + 1;
    while (end < text.size() && is_ident_byte(text[end])) ++end;
    if (end == open + 1 || end >= text.size() || text[end] != '}') continue;
    const auto token = text.substr(open, end - open + 1);
    bool ok = false;
    for (auto a : allowed) ok = ok || token == a;
    if (!ok) throw UnresolvedPlaceholderError(std::string(what) + " has unknown placeholder " + std::string(token));
  }
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::create(TaskId task, std::string system_text, std::string user_template,
                                      std::string answer_format_hint) {
  for (auto ph : {kInstruction, kInput}) {
    const auto n = count_occurrences(user_template, ph);
    if (n != 1) {
      throw UnresolvedPlaceholderError("user template must contain " + std::string(ph) + " exactly once (found " +
                                       std::to_string(n) + ")");
    }
  }
  check_placeholders(user_template, {kInstruction, kInput}, "user template");
  check_placeholders(answer_format_hint, {kChoices}, "answer format hint");

  PromptTemplate t;
  t.task_ = task;
  t.system_text_ = std::move(system_text);
  t.user_template_ = std::move(user_template);
  t.answer_format_hint_ = std::move(answer_format_hint);
  return t;
}

RenderedPrompt render(const PromptTemplate& t, const TaskExample& e) {
  if (t.task() != e.task) {
    throw TaskMismatchError("template is for " + std::string(to_string(t.task())) + " but example " + e.example_id +
                            " is " + std::string(to_string(e.task)));
  }
  // Single left-to-right pass so substituted text is never rescanned.
  const std::string_view tmpl = t.user_template();
  std::string user;
  user.reserve(tmpl.size() + e.instruction.size() + e.input.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    if (tmpl.substr(pos, kInstruction.size()) == kInstruction) {
      user += e.instruction;
      pos += kInstruction.size();
    } else if (tmpl.substr(pos, kInput.size()) == kInput) {
      user += e.input;
      pos += kInput.size();
    } else {
      user += tmpl[pos++];
    }
  }

  if (!t.answer_format_hint().empty()) {
    std::string hint = t.answer_format_hint();
    if (auto at = hint.find(kChoices); at != std::string::npos) {
      if (e.choices.empty()) {
        throw UnresolvedPlaceholderError("hint uses {choices} but example " + e.example_id + " has none");
      }
      hint.replace(at, kChoices.size(), join(e.choices, ", "));
    }
    user += "\n\n";
    user += hint;
  }
  return {t.system_text(), std::move(user), e.example_id, e.task};
}

PromptTemplate default_template(TaskId task) {
  switch (task) {
    case TaskId::Classification:
      return PromptTemplate::create(
          task, "You are a financial analyst who labels argument structure in earnings call transcripts.",
          "{instruction}\n\nText: {input}", "Respond with exactly one word from: {choices}.");
    case TaskId::Summarization:
      return PromptTemplate::create(task, "You are a financial analyst who writes concise news summaries.",
                                    "{instruction}\n\nDocument: {input}",
                                    "Respond with the summary only, in one or two sentences.");
    case TaskId::Trading:
      return PromptTemplate::create(
          task, "You are a trading assistant managing a single stock position with daily decisions.",
          "{instruction}\n\nMarket context: {input}", "Respond with exactly one word: buy, sell, or hold.");
  }
  throw Error("unknown task");
}

TemplateSet default_templates() {
  TemplateSet set;
  for (auto t : {TaskId::Classification, TaskId::Summarization, TaskId::Trading}) set.emplace(t, default_template(t));
  return set;
}

TemplateSet load_templates(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("template file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw Error("template file " + path.string() + " must be a JSON object");

  TemplateSet set = default_templates();
  for (const auto& [key, value] : doc.items()) {
    const auto task = parse_task_id(key);
    if (!task) throw Error("template file has unknown task '" + key + "'");
    if (!value.is_object() || !value.contains("user") || !value["user"].is_string()) {
      throw Error("template for " + key + " needs a string 'user' field");
    }
    set.insert_or_assign(*task, PromptTemplate::create(*task, value.value("system", std::string{}),
                                                       value["user"].get<std::string>(),
                                                       value.value("answer_format_hint", std::string{})));
  }
  return set;
}

}  // namespace finharness
