#include "dosefind/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace dosefind {

DoseDesign::DoseDesign(std::vector<double> doses_, std::vector<int> allocations_)
    : doses(std::move(doses_)), allocations(std::move(allocations_)) {
  if (doses.empty()) throw input_error("design needs at least one dose");
  if (doses.size() != allocations.size())
    throw input_error("design doses and allocations differ in length");
  for (std::size_t i = 0; i < doses.size(); ++i) {
    if (!std::isfinite(doses[i]) || doses[i] < 0.0)
      throw input_error("design doses must be finite and nonnegative");
    if (i > 0 && doses[i] <= doses[i - 1])
      throw input_error("design doses must be strictly increasing");
    if (allocations[i] <= 0) throw input_error("design allocations must be positive");
  }
}

int DoseDesign::total() const {
  int n = 0;
  for (int a : allocations) n += a;
  return n;
}

Dataset::Dataset(DoseDesign design_, std::vector<Observation> observations_)
    : design(std::move(design_)), observations(std::move(observations_)) {
  std::vector<int> counts(design.arms(), 0);
  for (const auto& o : observations) {
    if (o.dose_index < 0 || o.dose_index >= static_cast<int>(design.arms()))
      throw input_error("observation dose index out of range");
    if (!std::isfinite(o.response)) throw input_error("responses must be finite");
    ++counts[o.dose_index];
  }
  for (std::size_t i = 0; i < design.arms(); ++i)
    if (counts[i] != design.allocations[i])
      throw input_error("per-dose observation counts do not match design allocations");

  aggregates_.resize(design.arms());
  for (std::size_t i = 0; i < design.arms(); ++i) aggregates_[i].count = counts[i];
  for (const auto& o : observations) aggregates_[o.dose_index].mean += o.response;
  for (auto& a : aggregates_) a.mean /= static_cast<double>(a.count);
  for (const auto& o : observations) {
    double r = o.response - aggregates_[o.dose_index].mean;
    aggregates_[o.dose_index].centered_ss += r * r;
  }
}

std::vector<std::vector<double>> Dataset::grouped_responses() const {
  std::vector<std::vector<double>> groups(design.arms());
  for (std::size_t i = 0; i < design.arms(); ++i)
    groups[i].reserve(static_cast<std::size_t>(design.allocations[i]));
  for (const auto& o : observations) groups[o.dose_index].push_back(o.response);
  return groups;
}

Dataset dataset_from_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw input_error("line 1: missing header");
  ++line_no;
  // Tolerate UTF-8 BOM and trailing CR.
  if (line.size() >= 3 && line.compare(0, 3, "\xef\xbb\xbf") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "dose,response")
    throw input_error("line 1: expected header 'dose,response', got '" + line + "'");

  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw input_error("line " + std::to_string(line_no) + ": expected 'dose,response'");
    std::string dose_s = line.substr(0, comma);
    std::string resp_s = line.substr(comma + 1);
    try {
      std::size_t used = 0;
      double dose = std::stod(dose_s, &used);
      if (used != dose_s.size()) throw std::invalid_argument("");
      double resp = std::stod(resp_s, &used);
      if (used != resp_s.size()) throw std::invalid_argument("");
      if (!std::isfinite(dose) || !std::isfinite(resp)) throw std::invalid_argument("");
      rows.emplace_back(dose, resp);
    } catch (const std::exception&) {
      throw input_error("line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (rows.empty()) throw input_error("no data rows");

  std::map<double, int> counts;
  for (const auto& [dose, resp] : rows) ++counts[dose];
  std::vector<double> doses;
  std::vector<int> allocations;
  for (const auto& [dose, count] : counts) {
    doses.push_back(dose);
    allocations.push_back(count);
  }
  DoseDesign design(std::move(doses), std::move(allocations));
  std::vector<Observation> obs;
  obs.reserve(rows.size());
  for (const auto& [dose, resp] : rows) {
    auto it = std::lower_bound(design.doses.begin(), design.doses.end(), dose);
    obs.push_back({static_cast<int>(it - design.doses.begin()), resp});
  }
  return Dataset(std::move(design), std::move(obs));
}

Dataset dataset_from_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open file: " + path.string());
  return dataset_from_csv(in);
}

void dataset_to_csv(const Dataset& data, std::ostream& out) {
  out << "dose,response\n";
  char buf[64];
  for (const auto& o : data.observations) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", data.design.doses[o.dose_index],
                  o.response);
    out << buf;
  }
}

}  // namespace dosefind
