#pragma once

// Right-censored competing-risks sample: observed time, event code
// (0 = censored, 1/2 = causes), binary treatment, covariate matrix.

#include <optional>
#include <string>
#include <vector>

#include "lyl/common.hpp"

namespace lyl {

struct ObservationRecord {
  double time;                 // T~ = min(T, C)
  int event;                   // 0 censored, 1 or 2 cause
  int treatment;               // 0 or 1
  std::vector<double> x;
};

class SurvivalDataset {
 public:
  SurvivalDataset() : d_(0) {}
  SurvivalDataset(std::vector<double> times, std::vector<int> events,
                  std::vector<int> treatments, std::vector<double> covariates,
                  std::size_t d);

  std::size_t n() const { return times_.size(); }
  std::size_t d() const { return d_; }

  double time(std::size_t i) const { return times_[i]; }
  int event(std::size_t i) const { return events_[i]; }
  int treatment(std::size_t i) const { return treatments_[i]; }
  // pointer to row i of the n x d covariate matrix
  const double* x_row(std::size_t i) const { return &covariates_[i * d_]; }
  double x(std::size_t i, std::size_t col) const {
    return covariates_[i * d_ + col];
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& events() const { return events_; }
  const std::vector<int>& treatments() const { return treatments_; }
  const std::vector<double>& covariates() const { return covariates_; }

  ObservationRecord record(std::size_t i) const;

  // Rows in `keep` order (used to materialize fold splits).
  SurvivalDataset subset(const std::vector<std::size_t>& keep) const;

  std::size_t count_events(int cause) const;

 private:
  std::vector<double> times_;
  std::vector<int> events_;
  std::vector<int> treatments_;
  std::vector<double> covariates_;  // row-major n x d
  std::size_t d_;
};

// Column selection for CSV I/O.  Empty covariate list = every column not
// otherwise claimed, in header order.
struct CsvSchema {
  std::string time = "time";
  std::string event = "event";
  std::string treatment = "treatment";
  std::vector<std::string> covariates = {};
};

SurvivalDataset load_dataset(const std::string& path,
                             const CsvSchema& schema = {});
// Shortest round-trip formatting, so save -> load -> save is byte-stable
// and doubles survive bit-exactly.
void save_dataset(const SurvivalDataset& data, const std::string& path,
                  const CsvSchema& schema = {});

}  // namespace lyl
