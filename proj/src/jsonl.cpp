#include "factcheck/jsonl.hpp"

#include <stdexcept>

namespace factcheck {

void for_each_jsonl_record(const std::filesystem::path& path,
                           const std::function<void(std::size_t, const Json&)>& on_record,
                           const std::function<void(std::size_t, const std::string&)>& on_error) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t') {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        Json record = Json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            on_error(line_no, "invalid JSON");
            continue;
        }
        on_record(line_no, record);
    }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
}

void JsonlWriter::write(const Json& record) {
    out_ << record.dump() << '\n';
}

void JsonlWriter::close() {
    out_.close();
}

}  // namespace factcheck
