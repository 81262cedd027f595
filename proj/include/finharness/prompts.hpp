#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "finharness/common.hpp"
#include "finharness/corpus.hpp"

namespace finharness {

class TaskMismatchError : public Error {
 public:
  using Error::Error;
};

class UnresolvedPlaceholderError : public Error {
 public:
  using Error::Error;
};

/// A chat prompt recipe for one task.
///
/// `user_template` must contain `{instruction}` and `{input}` exactly once and
/// no other `{name}` token. `answer_format_hint` is appended to the user turn
/// after a blank line; it may contain `{choices}`, which renders as the
/// example's choices joined by ", ".
class PromptTemplate {
 public:
  static PromptTemplate create(TaskId task, std::string system_text, std::string user_template,
                               std::string answer_format_hint = {});

  TaskId task() const noexcept { return task_; }
  const std::string& system_text() const noexcept { return system_text_; }
  const std::string& user_template() const noexcept { return user_template_; }
  const std::string& answer_format_hint() const noexcept { return answer_format_hint_; }

 private:
  PromptTemplate() = default;

  TaskId task_ = TaskId::Classification;
  std::string system_text_;
  std::string user_template_;
  std::string answer_format_hint_;
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
  std::string example_id;
  TaskId task = TaskId::Classification;
};

RenderedPrompt render(const PromptTemplate& t, const TaskExample& e);

/// Built-in templates. These are our own wording, not a published prompt set.
PromptTemplate default_template(TaskId task);

using TemplateSet = std::map<TaskId, PromptTemplate>;

/// JSON file of the form
///   {"classification": {"system": "...", "user": "...", "answer_format_hint": "..."}, ...}
/// Tasks absent from the file fall back to the defaults.
TemplateSet load_templates(const std::filesystem::path& path);
TemplateSet default_templates();

}  // namespace finharness
