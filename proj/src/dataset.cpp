#include "droplab/dataset.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <string_view>
#include <vector>

namespace droplab {

namespace fs = std::filesystem;

DatasetError::DatasetError(const fs::path& file, std::size_t line, const std::string& msg)
    : std::runtime_error(file.string() + ":" + std::to_string(line) + ": " + msg), file_(file), line_(line) {}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

// Non-blank, non-comment lines with their 1-based numbers.
std::vector<Line> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError(file, 0, "cannot open");
  std::vector<Line> out;
  std::string s;
  std::size_t no = 0;
  while (std::getline(in, s)) {
    ++no;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos || s[first] == '#') continue;
    out.push_back({no, s});
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('\t', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

void expect_rows(const fs::path& file, const std::vector<Line>& lines, std::size_t n) {
  if (lines.size() != n)
    throw DatasetError(file, lines.empty() ? 0 : lines.back().number,
                       "expected " + std::to_string(n) + " rows, found " + std::to_string(lines.size()));
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Graph load_dataset(const fs::path& dir) {
  const fs::path gfile = dir / "graph.tsv";
  const auto lines = read_lines(gfile);
  if (lines.empty() || lines.front().text.rfind("n=", 0) != 0)
    throw DatasetError(gfile, lines.empty() ? 0 : lines.front().number, "missing 'n=<count>' header");
  const auto n = parse_number<std::size_t>(std::string_view(lines.front().text).substr(2));
  if (!n) throw DatasetError(gfile, lines.front().number, "bad node count");

  std::vector<Edge> edges;
  std::vector<std::uint8_t> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& ln = lines[i];
    const auto fields = split_tabs(ln.text);
    if (fields.size() != 2) throw DatasetError(gfile, ln.number, "expected 'u<TAB>v'");
    const auto u = parse_number<std::int64_t>(fields[0]);
    const auto v = parse_number<std::int64_t>(fields[1]);
    if (!u || !v) throw DatasetError(gfile, ln.number, "non-integer endpoint");
    if (*u < 0 || *v < 0 || static_cast<std::size_t>(*u) >= *n || static_cast<std::size_t>(*v) >= *n)
      throw DatasetError(gfile, ln.number, "index out of range for n=" + std::to_string(*n));
    if (*u == *v) throw DatasetError(gfile, ln.number, "self-loop");
    edges.emplace_back(static_cast<std::int32_t>(*u), static_cast<std::int32_t>(*v));
  }
  Graph g;
  try {
    g = Graph::from_edges(*n, edges);
  } catch (const std::exception& e) {
    // Report the first line carrying a repeated pair.
    std::vector<std::pair<std::uint64_t, std::size_t>> keys;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      auto [u, v] = edges[i];
      if (u > v) std::swap(u, v);
      keys.emplace_back((static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v), lines[i + 1].number);
    }
    std::stable_sort(keys.begin(), keys.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::size_t line = 0;
    for (std::size_t i = 1; i < keys.size(); ++i)
      if (keys[i].first == keys[i - 1].first) line = std::max(line, keys[i].second);
    throw DatasetError(gfile, line, e.what());
  }

  if (const fs::path f = dir / "features.tsv"; fs::exists(f)) {
    const auto rows = read_lines(f);
    expect_rows(f, rows, *n);
    Tensor x;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto fields = split_tabs(rows[i].text);
      if (i == 0) x = Tensor(*n, fields.size());
      if (fields.size() != x.cols)
        throw DatasetError(f, rows[i].number, "expected " + std::to_string(x.cols) + " columns");
      for (std::size_t c = 0; c < fields.size(); ++c) {
        const auto v = parse_number<double>(fields[c]);
        if (!v) throw DatasetError(f, rows[i].number, "bad number '" + std::string(fields[c]) + "'");
        x(i, c) = *v;
      }
    }
    g.features = std::move(x);
  }
  if (const fs::path f = dir / "labels.tsv"; fs::exists(f)) {
    const auto rows = read_lines(f);
    expect_rows(f, rows, *n);
    g.labels.resize(*n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto v = parse_number<int>(rows[i].text);
      if (!v || *v < -1) throw DatasetError(f, rows[i].number, "label must be an integer >= -1");
      g.labels[i] = *v;
    }
  }
  if (const fs::path f = dir / "splits.tsv"; fs::exists(f)) {
    const auto rows = read_lines(f);
    expect_rows(f, rows, *n);
    g.split.resize(*n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto s = parse_split(rows[i].text);
      if (!s) throw DatasetError(f, rows[i].number, "split must be train|val|test|none");
      if (*s != Split::kNone && (g.labels.empty() || g.labels[i] < 0))
        throw DatasetError(f, rows[i].number, "split tag on unlabeled node");
      g.split[i] = *s;
    }
  }
  return g;
}

void save_dataset(const Graph& g, const fs::path& dir) {
  if (g.has_self_loops()) throw std::invalid_argument("save_dataset: graph contains self-loops");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "graph.tsv", std::ios::binary);
    out << "n=" << g.n << '\n';
    for (auto [u, v] : g.undirected_edges()) out << u << '\t' << v << '\n';
  }
  if (g.features) {
    std::ofstream out(dir / "features.tsv", std::ios::binary);
    const Tensor& x = *g.features;
    for (std::size_t i = 0; i < x.rows; ++i) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        if (c) out << '\t';
        out << format_double(x(i, c));
      }
      out << '\n';
    }
  }
  if (!g.labels.empty()) {
    std::ofstream out(dir / "labels.tsv", std::ios::binary);
    for (int l : g.labels) out << l << '\n';
  }
  if (!g.split.empty()) {
    std::ofstream out(dir / "splits.tsv", std::ios::binary);
    for (Split s : g.split) out << to_string(s) << '\n';
  }
}

}  // namespace droplab
