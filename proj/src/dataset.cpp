#include "prepivot/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace prepivot {

GroupedDataset GroupedDataset::from_groups(const std::vector<std::vector<double>>& groups) {
  std::vector<int> sizes;
  sizes.reserve(groups.size());
  for (const auto& g : groups) sizes.push_back(int(g.size()));
  GroupedDataset ds(1, std::move(sizes));
  for (int g = 0; g < ds.k(); ++g)
    for (int i = 0; i < ds.size(g); ++i) *ds.mutable_row(g, i) = groups[g][i];
  return ds;
}

void check_assignment(const GroupedDataset& ds, const GroupAssignment& a) {
  if (int(a.size()) != ds.n())
    throw ShapeError("assignment length " + std::to_string(a.size()) +
                     " does not match dataset size " + std::to_string(ds.n()));
  std::vector<int> counts(ds.k(), 0);
  for (int g : a) {
    if (g < 0 || g >= ds.k()) throw ShapeError("assignment label out of range");
    ++counts[g];
  }
  for (int g = 0; g < ds.k(); ++g)
    if (counts[g] != ds.size(g))
      throw ShapeError("assignment group counts do not match dataset sizes");
}

void permute_into(const GroupedDataset& ds, const GroupAssignment& a, GroupedDataset& out) {
  check_assignment(ds, a);
  const int d = ds.dim();
  std::vector<int> next(ds.k(), 0);
  for (int j = 0; j < ds.n(); ++j) {
    const int g = a[j];
    std::memcpy(out.mutable_row(g, next[g]++), ds.stacked_row(j), sizeof(double) * d);
  }
}

GroupedDataset permute(const GroupedDataset& ds, const GroupAssignment& a) {
  GroupedDataset out(ds.dim(), ds.sizes());
  permute_into(ds, a, out);
  return out;
}

void random_assignment_into(const GroupedDataset& ds, RngStream& rng, GroupAssignment& a) {
  const int n = ds.n();
  a.resize(n);
  int j = 0;
  for (int g = 0; g < ds.k(); ++g)
    for (int i = 0; i < ds.size(g); ++i) a[j++] = g;
  // Fisher-Yates; uniform over all n! orderings, hence uniform over partitions.
  for (int i = n - 1; i > 0; --i) {
    const int r = int(rng.uniform_int(std::uint64_t(i) + 1));
    std::swap(a[i], a[r]);
  }
}

GroupAssignment random_assignment(const GroupedDataset& ds, RngStream& rng) {
  GroupAssignment a;
  random_assignment_into(ds, rng, a);
  return a;
}

void bootstrap_resample_into(const GroupedDataset& ds, RngStream& rng, GroupedDataset& out) {
  const int d = ds.dim();
  for (int g = 0; g < ds.k(); ++g) {
    const int ng = ds.size(g);
    for (int i = 0; i < ng; ++i) {
      const int r = int(rng.uniform_int(std::uint64_t(ng)));
      std::memcpy(out.mutable_row(g, i), ds.row(g, r), sizeof(double) * d);
    }
  }
}

GroupedDataset bootstrap_resample(const GroupedDataset& ds, RngStream& rng) {
  GroupedDataset out(ds.dim(), ds.sizes());
  bootstrap_resample_into(ds, rng, out);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

CsvDataset read_grouped_csv(std::istream& in, const std::string& name) {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(name + ":" + std::to_string(lineno) + ": " + what);
  };

  if (!std::getline(in, line)) {
    lineno = 1;
    fail("empty input, header row required");
  }
  ++lineno;
  auto header = split_csv_line(line);
  if (header.empty() || trim(header[0]) != "group")
    fail("header must start with a `group` column");
  const int d = int(header.size()) - 1;
  if (d < 1) fail("need at least one numeric response column");

  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;   // per group, flattened d at a time
  auto group_index = [&](const std::string& label) {
    for (std::size_t g = 0; g < labels.size(); ++g)
      if (labels[g] == label) return int(g);
    labels.push_back(label);
    rows.emplace_back();
    return int(labels.size()) - 1;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (int(cells.size()) != d + 1)
      fail("expected " + std::to_string(d + 1) + " columns, got " + std::to_string(cells.size()));
    const int g = group_index(cells[0]);
    for (int c = 0; c < d; ++c) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cells[c + 1], &pos);
        if (pos != cells[c + 1].size()) throw std::invalid_argument("");
        rows[g].push_back(v);
      } catch (const std::exception&) {
        fail("column " + std::to_string(c + 2) + " is not numeric: '" + cells[c + 1] + "'");
      }
    }
  }
  if (labels.empty()) {
    fail("no data rows");
  }

  std::vector<int> sizes;
  for (const auto& r : rows) sizes.push_back(int(r.size()) / d);
  CsvDataset out{GroupedDataset(d, sizes), std::move(labels)};
  for (int g = 0; g < out.data.k(); ++g)
    for (int i = 0; i < out.data.size(g); ++i)
      std::memcpy(out.data.mutable_row(g, i), rows[g].data() + std::size_t(i) * d,
                  sizeof(double) * d);
  return out;
}

CsvDataset read_grouped_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  return read_grouped_csv(in, path);
}

}  // namespace prepivot
