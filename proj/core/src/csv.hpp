#pragma once

// Internal CSV helpers shared by the file readers.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace catgraph::detail {

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);
std::string trim(std::string_view s);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace catgraph::detail
