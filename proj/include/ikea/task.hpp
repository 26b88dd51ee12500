#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ikea {

enum class Label { Easy, Hard, Unlabeled };

std::string_view to_string(Label l);
Label label_from_string(std::string_view s);

struct TaskInstance {
  std::string task_id;
  std::string question;
  std::vector<std::string> golds;
  Label label = Label::Unlabeled;
  std::string source;

  bool operator==(const TaskInstance&) const = default;
};

}  // namespace ikea
