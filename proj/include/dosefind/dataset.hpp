#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <vector>

#include "dosefind/errors.hpp"

namespace dosefind {

// Dose grid of a trial. doses must be strictly increasing; the first entry is
// the reference (placebo) dose, usually 0. allocations are patients per dose.
struct DoseDesign {
  std::vector<double> doses;
  std::vector<int> allocations;

  DoseDesign() = default;
  DoseDesign(std::vector<double> doses_, std::vector<int> allocations_);

  std::size_t arms() const { return doses.size(); }
  int total() const;
  double d0() const { return doses.front(); }
  double dmax() const { return doses.back(); }
};

struct Observation {
  int dose_index = 0;
  double response = 0.0;
};

struct DoseAggregate {
  int count = 0;
  double mean = 0.0;
  double centered_ss = 0.0;  // sum of (y - mean)^2 within the dose group
};

struct Dataset {
  DoseDesign design;
  std::vector<Observation> observations;

  Dataset() = default;
  // Validates that per-dose counts match design allocations.
  Dataset(DoseDesign design_, std::vector<Observation> observations_);

  std::size_t size() const { return observations.size(); }
  const std::vector<DoseAggregate>& aggregates() const { return aggregates_; }
  // Responses grouped by dose index, in observation order.
  std::vector<std::vector<double>> grouped_responses() const;

 private:
  std::vector<DoseAggregate> aggregates_;
};

// CSV with header "dose,response". The design is inferred from the distinct
// dose values (ascending) with allocations equal to their counts.
// Throws input_error with a line number on malformed rows.
Dataset dataset_from_csv(std::istream& in);
Dataset dataset_from_csv_file(const std::filesystem::path& path);
void dataset_to_csv(const Dataset& data, std::ostream& out);

}  // namespace dosefind
