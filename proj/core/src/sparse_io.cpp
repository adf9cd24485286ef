#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "advmal/datamodel.hpp"

namespace advmal {

namespace {

struct SparseRow {
  int label = 0;
  std::vector<std::pair<std::size_t, double>> entries;
  std::size_t line = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) tokens.push_back(s.substr(i, j - i));
    i = j;
  }
  return tokens;
}

// "# dim=200 classes=2"
void parse_header(std::string_view line, std::optional<std::size_t>& dim,
                  std::optional<int>& classes) {
  for (std::string_view tok : split_ws(line.substr(1))) {
    std::size_t value = 0;
    if (tok.starts_with("dim=") && parse_number(tok.substr(4), value)) dim = value;
    if (tok.starts_with("classes=") && parse_number(tok.substr(8), value))
      classes = static_cast<int>(value);
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

Dataset parse_sparse(std::istream& in, std::optional<std::size_t> dim,
                     std::optional<int> class_count) {
  std::optional<std::size_t> header_dim;
  std::optional<int> header_classes;
  std::vector<SparseRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t max_index_plus_one = 0;
  int max_label = -1;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      parse_header(line, header_dim, header_classes);
      continue;
    }
    std::vector<std::string_view> tokens = split_ws(line);
    SparseRow row;
    row.line = line_no;
    if (!parse_number(tokens[0], row.label) || row.label < 0)
      throw ParseError("malformed label '" + std::string(tokens[0]) + "'", line_no);
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::size_t colon = tokens[t].find(':');
      std::size_t idx = 0;
      double value = 0.0;
      if (colon == std::string_view::npos || !parse_number(tokens[t].substr(0, colon), idx) ||
          !parse_number(tokens[t].substr(colon + 1), value) || !std::isfinite(value))
        throw ParseError("malformed entry '" + std::string(tokens[t]) + "'", line_no);
      if (!row.entries.empty() && idx <= row.entries.back().first)
        throw ParseError("feature indices must be strictly ascending", line_no);
      row.entries.emplace_back(idx, value);
      max_index_plus_one = std::max(max_index_plus_one, idx + 1);
    }
    max_label = std::max(max_label, row.label);
    rows.push_back(std::move(row));
  }

  Dataset data;
  data.dim = dim.value_or(header_dim.value_or(max_index_plus_one));
  data.class_count = class_count.value_or(header_classes.value_or(std::max(2, max_label + 1)));
  for (auto& row : rows) {
    FeatureVector x(data.dim, 0.0);
    for (auto [idx, value] : row.entries) {
      if (idx >= data.dim)
        throw std::out_of_range("feature index " + std::to_string(idx) +
                                " exceeds dimension " + std::to_string(data.dim) + " (line " +
                                std::to_string(row.line) + ")");
      x[idx] = value;
    }
    if (row.label >= data.class_count)
      throw std::out_of_range("label " + std::to_string(row.label) + " outside " +
                              std::to_string(data.class_count) + " classes (line " +
                              std::to_string(row.line) + ")");
    data.examples.push_back(std::move(x));
    data.labels.push_back(row.label);
  }
  data.validate();
  return data;
}

void format_sparse(std::ostream& out, const Dataset& data) {
  out << "# dim=" << data.dim << " classes=" << data.class_count << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    const FeatureVector& x = data.examples[i];
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[j] != 0.0) out << ' ' << j << ':' << format_double(x[j]);
    out << '\n';
  }
}

Dataset read_sparse(const std::filesystem::path& path, std::optional<std::size_t> dim,
                    std::optional<int> class_count) {
  std::ifstream in = open_for_read(path);
  return parse_sparse(in, dim, class_count);
}

void write_sparse(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out = open_for_write(path);
  format_sparse(out, data);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

ManipulationPolicy parse_policy(std::istream& in, std::optional<std::size_t> dim) {
  struct PolicyRow {
    std::size_t idx;
    bool add;
    bool remove;
    std::size_t line;
  };
  std::vector<PolicyRow> rows;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t max_index_plus_one = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string_view> tokens = split_ws(line);
    std::size_t idx = 0;
    int add = 0;
    int remove = 0;
    if (tokens.size() != 3 || !parse_number(tokens[0], idx) || !parse_number(tokens[1], add) ||
        !parse_number(tokens[2], remove) || (add != 0 && add != 1) ||
        (remove != 0 && remove != 1))
      throw ParseError("expected 'idx add_flag remove_flag'", line_no);
    rows.push_back({idx, add == 1, remove == 1, line_no});
    max_index_plus_one = std::max(max_index_plus_one, idx + 1);
  }
  const std::size_t d = dim.value_or(max_index_plus_one);
  ManipulationPolicy policy = ManipulationPolicy::none_allowed(d);
  std::vector<bool> seen(d, false);
  for (const PolicyRow& row : rows) {
    if (row.idx >= d)
      throw std::out_of_range("policy index " + std::to_string(row.idx) +
                              " exceeds dimension " + std::to_string(d) + " (line " +
                              std::to_string(row.line) + ")");
    if (seen[row.idx])
      throw ParseError("duplicate policy entry " + std::to_string(row.idx), row.line);
    seen[row.idx] = true;
    policy.addition_allowed[row.idx] = row.add;
    policy.removal_allowed[row.idx] = row.remove;
  }
  return policy;
}

void format_policy(std::ostream& out, const ManipulationPolicy& policy) {
  for (std::size_t i = 0; i < policy.dim(); ++i)
    out << i << ' ' << (policy.addition_allowed[i] ? 1 : 0) << ' '
        << (policy.removal_allowed[i] ? 1 : 0) << '\n';
}

ManipulationPolicy read_policy(const std::filesystem::path& path,
                               std::optional<std::size_t> dim) {
  std::ifstream in = open_for_read(path);
  return parse_policy(in, dim);
}

void write_policy(const std::filesystem::path& path, const ManipulationPolicy& policy) {
  std::ofstream out = open_for_write(path);
  format_policy(out, policy);
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace advmal
