#include "keyhead/jsonl.hpp"

namespace keyhead {

void for_each_jsonl(const std::string& path,
                    const std::function<void(const nlohmann::json&, int line_no)>& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError("jsonl: cannot open " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    fn(record, line_no);
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("json: cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_json_file(const std::string& path, const nlohmann::ordered_json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ContractError("json: cannot open " + path + " for writing");
  out << value.dump(2) << '\n';
}

}  // namespace keyhead
