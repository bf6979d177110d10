#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "droplab/graph.hpp"

namespace droplab {

/// Malformed dataset input, with the offending file and 1-based line.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::filesystem::path& file, std::size_t line, const std::string& msg);
  const std::filesystem::path& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::filesystem::path file_;
  std::size_t line_;
};

// Directory layout (UTF-8, tab separated, '#' starts a comment line,
// 0-based indices):
//   graph.tsv     "n=<count>" header, then one "u<TAB>v" line per undirected edge
//   features.tsv  optional, n lines of c numbers
//   labels.tsv    optional, n lines, class index or -1
//   splits.tsv    optional, n lines of train|val|test|none
Graph load_dataset(const std::filesystem::path& dir);

/// Writes the layout above with edges in canonical (u < v, sorted) order and
/// features in shortest round-trip decimal form.
void save_dataset(const Graph& g, const std::filesystem::path& dir);

}  // namespace droplab
