#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptd/scene.hpp"

// Line-oriented dataset files: one JSON object per scene,
//   {"scene_id": ..., "dt": ..., "entities": [{"id", "class", "class_label",
//    "features": [[step 1 coords], [step 2 coords], ...]}],
//    "switch_labels": {"<human id>": [bits]}}
namespace ptd {

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string scene_to_line(const Scene& scene);
// line_no and source only label the error messages.
Scene scene_from_line(const std::string& line, std::size_t line_no = 1, const std::string& source = "<input>");

void write_dataset(const std::vector<Scene>& scenes, std::ostream& out);
void write_dataset(const std::vector<Scene>& scenes, const std::filesystem::path& path);
std::vector<Scene> read_dataset(std::istream& in, const std::string& source = "<input>");
std::vector<Scene> read_dataset(const std::filesystem::path& path);

}  // namespace ptd
