#include "lyl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lyl {

SurvivalDataset::SurvivalDataset(std::vector<double> times,
                                 std::vector<int> events,
                                 std::vector<int> treatments,
                                 std::vector<double> covariates, std::size_t d)
    : times_(std::move(times)),
      events_(std::move(events)),
      treatments_(std::move(treatments)),
      covariates_(std::move(covariates)),
      d_(d) {
  const std::size_t n = times_.size();
  if (events_.size() != n || treatments_.size() != n)
    throw Error(ErrorKind::InputError, "dataset: column length mismatch");
  if (d_ < 1 || covariates_.size() != n * d_)
    throw Error(ErrorKind::InputError, "dataset: covariate shape mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(times_[i]) || times_[i] < 0.0)
      throw Error(ErrorKind::NonFiniteValue,
                  "dataset: time must be finite and >= 0 at row " +
                      std::to_string(i));
    if (events_[i] < 0 || events_[i] > 2)
      throw Error(ErrorKind::BadEventCode,
                  "dataset: event code not in {0,1,2} at row " +
                      std::to_string(i));
    if (treatments_[i] != 0 && treatments_[i] != 1)
      throw Error(ErrorKind::BadTreatmentCode,
                  "dataset: treatment not in {0,1} at row " +
                      std::to_string(i));
  }
  for (double v : covariates_)
    if (!std::isfinite(v))
      throw Error(ErrorKind::NonFiniteValue, "dataset: non-finite covariate");
}

ObservationRecord SurvivalDataset::record(std::size_t i) const {
  ObservationRecord r;
  r.time = times_[i];
  r.event = events_[i];
  r.treatment = treatments_[i];
  r.x.assign(x_row(i), x_row(i) + d_);
  return r;
}

SurvivalDataset SurvivalDataset::subset(
    const std::vector<std::size_t>& keep) const {
  std::vector<double> t, xv;
  std::vector<int> e, a;
  t.reserve(keep.size());
  e.reserve(keep.size());
  a.reserve(keep.size());
  xv.reserve(keep.size() * d_);
  for (std::size_t i : keep) {
    t.push_back(times_[i]);
    e.push_back(events_[i]);
    a.push_back(treatments_[i]);
    xv.insert(xv.end(), x_row(i), x_row(i) + d_);
  }
  return SurvivalDataset(std::move(t), std::move(e), std::move(a),
                         std::move(xv), d_);
}

std::size_t SurvivalDataset::count_events(int cause) const {
  return static_cast<std::size_t>(
      std::count(events_.begin(), events_.end(), cause));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& s, std::size_t row) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0' || !std::isfinite(v))
    throw Error(ErrorKind::NonFiniteValue,
                "csv: bad real '" + s + "' at data row " + std::to_string(row));
  return v;
}

int parse_code(const std::string& s, std::size_t row, ErrorKind kind,
               const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(kind, std::string("csv: bad ") + what + " '" + s +
                          "' at data row " + std::to_string(row));
  return v;
}

std::string format_real(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

SurvivalDataset load_dataset(const std::string& path,
                             const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InputError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::InputError, "empty csv: " + path);
  const auto header = split_csv_line(line);

  auto col_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorKind::MissingColumn,
                  "csv: missing column '" + name + "' in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t tc = col_of(schema.time);
  const std::size_t ec = col_of(schema.event);
  const std::size_t ac = col_of(schema.treatment);
  std::vector<std::size_t> xc;
  if (schema.covariates.empty()) {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (k != tc && k != ec && k != ac) xc.push_back(k);
  } else {
    for (const auto& name : schema.covariates) xc.push_back(col_of(name));
  }
  if (xc.empty())
    throw Error(ErrorKind::MissingColumn, "csv: no covariate columns");

  std::vector<double> times, covs;
  std::vector<int> events, treats;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorKind::InputError,
                  "csv: row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    times.push_back(parse_real(fields[tc], row));
    events.push_back(
        parse_code(fields[ec], row, ErrorKind::BadEventCode, "event code"));
    treats.push_back(parse_code(fields[ac], row, ErrorKind::BadTreatmentCode,
                                "treatment code"));
    for (std::size_t k : xc) covs.push_back(parse_real(fields[k], row));
  }
  return SurvivalDataset(std::move(times), std::move(events), std::move(treats),
                         std::move(covs), xc.size());
}

void save_dataset(const SurvivalDataset& data, const std::string& path,
                  const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InputError, "cannot write " + path);
  std::vector<std::string> xnames = schema.covariates;
  if (xnames.empty())
    for (std::size_t k = 0; k < data.d(); ++k)
      xnames.push_back("x" + std::to_string(k + 1));
  if (xnames.size() != data.d())
    throw Error(ErrorKind::InputError, "save_dataset: covariate name count");
  out << schema.time << ',' << schema.event << ',' << schema.treatment;
  for (const auto& nm : xnames) out << ',' << nm;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    out << format_real(data.time(i)) << ',' << data.event(i) << ','
        << data.treatment(i);
    for (std::size_t k = 0; k < data.d(); ++k)
      out << ',' << format_real(data.x(i, k));
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::InputError, "write failed: " + path);
}

}  // namespace lyl
