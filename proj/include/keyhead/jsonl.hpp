#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "keyhead/errors.hpp"

namespace keyhead {

// Streams a JSON-lines file; throws ParseError with "path:line" context on
// unreadable files or malformed lines. Blank lines are skipped.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const nlohmann::json&, int line_no)>& fn);

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw ContractError("jsonl: cannot open " + path + " for writing");
  }
  void write(const nlohmann::ordered_json& record) { out_ << record.dump() << '\n'; }

 private:
  std::ofstream out_;
};

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::ordered_json& value);

}  // namespace keyhead
