#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

namespace factcheck {

using Json = nlohmann::json;

// Calls `on_record(line_number, parsed)` for each non-empty line;
// `on_error(line_number, what)` for lines that fail to parse.
void for_each_jsonl_record(const std::filesystem::path& path,
                           const std::function<void(std::size_t, const Json&)>& on_record,
                           const std::function<void(std::size_t, const std::string&)>& on_error);

class JsonlWriter {
public:
    explicit JsonlWriter(const std::filesystem::path& path);
    void write(const Json& record);
    void close();

private:
    std::ofstream out_;
};

}  // namespace factcheck
