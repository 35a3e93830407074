#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "prepivot/errors.hpp"
#include "prepivot/rng.hpp"

namespace prepivot {

// n rows of dimension d partitioned into k groups, stored row-major with the
// rows of each group contiguous. Immutable through the const interface; the
// mutable row access exists for engine workspaces that rebuild in place.
class GroupedDataset {
 public:
  GroupedDataset() = default;

  GroupedDataset(int dim, std::vector<int> sizes)
      : dim_(dim), sizes_(std::move(sizes)) {
    if (dim_ < 1) throw ParameterError("dataset dimension must be >= 1");
    if (sizes_.empty()) throw ParameterError("dataset needs at least one group");
    offsets_.resize(sizes_.size() + 1, 0);
    for (std::size_t g = 0; g < sizes_.size(); ++g) {
      if (sizes_[g] < 1) throw ParameterError("every group needs at least one row");
      offsets_[g + 1] = offsets_[g] + sizes_[g];
    }
    data_.assign(std::size_t(offsets_.back()) * dim_, 0.0);
  }

  // Univariate convenience: one vector per group.
  static GroupedDataset from_groups(const std::vector<std::vector<double>>& groups);

  int n() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int k() const { return int(sizes_.size()); }
  int dim() const { return dim_; }
  int size(int g) const { return sizes_[g]; }
  const std::vector<int>& sizes() const { return sizes_; }

  const double* row(int g, int i) const { return data_.data() + std::size_t(offsets_[g] + i) * dim_; }
  const double* stacked_row(int j) const { return data_.data() + std::size_t(j) * dim_; }
  double* mutable_row(int g, int i) { return data_.data() + std::size_t(offsets_[g] + i) * dim_; }
  double* mutable_stacked_row(int j) { return data_.data() + std::size_t(j) * dim_; }

  double value(int g, int i) const { return *row(g, i); }  // univariate shortcut

  bool same_shape(const GroupedDataset& o) const {
    return dim_ == o.dim_ && sizes_ == o.sizes_;
  }

 private:
  int dim_ = 0;
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  std::vector<double> data_;
};

// Length-n vector of group indices; counts must match the dataset's sizes.
using GroupAssignment = std::vector<int>;

void check_assignment(const GroupedDataset& ds, const GroupAssignment& a);

// Relabel: row j of the stacked input goes to group a[j]; rows keep their
// stacked order within each group. Rows are copied, never aliased.
GroupedDataset permute(const GroupedDataset& ds, const GroupAssignment& a);
void permute_into(const GroupedDataset& ds, const GroupAssignment& a, GroupedDataset& out);

// Uniform over all assignments with the dataset's group counts.
GroupAssignment random_assignment(const GroupedDataset& ds, RngStream& rng);
void random_assignment_into(const GroupedDataset& ds, RngStream& rng, GroupAssignment& a);

// Within-group iid resampling with replacement; sizes preserved.
GroupedDataset bootstrap_resample(const GroupedDataset& ds, RngStream& rng);
void bootstrap_resample_into(const GroupedDataset& ds, RngStream& rng, GroupedDataset& out);

// CSV ingestion: header row required, first column `group` (string or integer
// label), remaining columns numeric. Group order = order of first appearance.
struct CsvDataset {
  GroupedDataset data;
  std::vector<std::string> labels;  // one per group
};

CsvDataset read_grouped_csv(std::istream& in, const std::string& name = "<csv>");
CsvDataset read_grouped_csv_file(const std::string& path);

}  // namespace prepivot
