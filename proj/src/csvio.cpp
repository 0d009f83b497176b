#include "sebf/csvio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sebf/version.hpp"

namespace sebf::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, int row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (...) {
    throw DataError("row " + std::to_string(row) + ": column '" + col +
                    "' has non-numeric value '" + s + "'");
  }
}

}  // namespace

IngestResult ingest(std::istream& in, const ColumnMap& columns,
                    const spatial::ObservationFamily& family) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty observation file");
  const auto header = split_csv_line(line);

  // Strict schema: every column must be declared, every declared column
  // must exist.
  std::map<std::string, int> col_idx;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::vector<std::string> known = {columns.site, columns.time, columns.count,
                                      columns.exposure};
    known.insert(known.end(), columns.coords.begin(), columns.coords.end());
    if (std::find(known.begin(), known.end(), header[i]) == known.end())
      throw DataError("unknown column '" + header[i] +
                      "' in observation file (declare it in data.columns)");
    col_idx[header[i]] = static_cast<int>(i);
  }
  const auto require = [&](const std::string& name) {
    auto it = col_idx.find(name);
    if (it == col_idx.end())
      throw DataError("observation file is missing column '" + name + "'");
    return it->second;
  };
  const int c_site = require(columns.site);
  const int c_time = require(columns.time);
  const int c_count = require(columns.count);
  const bool has_exposure = col_idx.count(columns.exposure) > 0;
  const int c_exposure = has_exposure ? col_idx[columns.exposure] : -1;
  std::vector<int> c_coords;
  for (const auto& c : columns.coords) c_coords.push_back(require(c));

  struct Cell {
    double y = 0.0;
    double tau = 0.0;
  };
  std::map<std::string, int> site_index;
  std::vector<std::string> site_ids;
  std::vector<std::vector<double>> site_coords;
  std::map<std::pair<int, int>, Cell> cells;  // (site, day) aggregated
  int max_day = 0;

  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    const std::string& site = fields[static_cast<std::size_t>(c_site)];
    const double day_raw = parse_number(fields[static_cast<std::size_t>(c_time)], row, columns.time);
    if (day_raw != std::floor(day_raw) || day_raw < 1)
      throw DataError("row " + std::to_string(row) +
                      ": day must be an integer >= 1");
    const int day = static_cast<int>(day_raw);
    const double y = parse_number(fields[static_cast<std::size_t>(c_count)], row, columns.count);
    try {
      family.validate(y);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    const double tau =
        has_exposure
            ? parse_number(fields[static_cast<std::size_t>(c_exposure)], row, columns.exposure)
            : 1.0;
    if (!(tau > 0.0)) {
      if (y > 0.0)
        throw DataError("row " + std::to_string(row) +
                        ": zero exposure with a positive count");
      throw DataError("row " + std::to_string(row) +
                      ": exposure must be > 0");
    }

    auto sit = site_index.find(site);
    int si;
    if (sit == site_index.end()) {
      si = static_cast<int>(site_ids.size());
      site_index[site] = si;
      site_ids.push_back(site);
      std::vector<double> xy;
      for (int c : c_coords)
        xy.push_back(parse_number(fields[static_cast<std::size_t>(c)], row,
                                  "coordinate"));
      site_coords.push_back(std::move(xy));
    } else {
      si = sit->second;
    }
    auto& cell = cells[{si, day}];
    cell.y += y;
    cell.tau += tau;
    max_day = std::max(max_day, day);
  }
  if (site_ids.empty()) throw DataError("observation file has no data rows");

  IngestResult res;
  res.site_ids = site_ids;
  const int n = static_cast<int>(site_ids.size());
  const int dim = static_cast<int>(columns.coords.size());
  res.coords.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d)
      res.coords(i, d) = site_coords[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
  res.T = max_day;
  res.slices.reserve(static_cast<std::size_t>(max_day));
  for (int day = 1; day <= max_day; ++day) {
    auto slice = spatial::ObsSlice::all_missing(n);
    for (int i = 0; i < n; ++i) {
      auto it = cells.find({i, day});
      if (it == cells.end()) continue;
      slice.observed[static_cast<std::size_t>(i)] = true;
      slice.y(i) = it->second.y;
      slice.tau(i) = it->second.tau;
    }
    res.slices.push_back(std::move(slice));
  }
  return res;
}

IngestResult ingest_file(const std::string& path, const ColumnMap& columns,
                         const spatial::ObservationFamily& family) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open observation file '" + path + "'");
  return ingest(in, columns, family);
}

void write_dataset_csv(std::ostream& out, const sim::Scenario& sc,
                       const sim::Dataset& ds, const ColumnMap& columns) {
  out << columns.site;
  for (const auto& c : columns.coords) out << ',' << c;
  out << ',' << columns.time << ',' << columns.count << ',' << columns.exposure
      << '\n';
  const int n = static_cast<int>(sc.coords.rows());
  out.precision(17);
  for (int t = 1; t <= sc.T; ++t) {
    const auto& slice = ds.y[static_cast<std::size_t>(t - 1)];
    for (int i = 0; i < n; ++i) {
      if (!slice.observed[static_cast<std::size_t>(i)]) continue;
      out << 's' << i;
      for (int d = 0; d < sc.coords.cols(); ++d) out << ',' << sc.coords(i, d);
      out << ',' << t << ',' << slice.y(i) << ',' << slice.tau(i) << '\n';
    }
  }
}

void write_truth_csv(std::ostream& out, const sim::Scenario& sc,
                     const sim::Dataset& ds) {
  out << "site,t,x\n";
  out.precision(17);
  for (int t = 0; t <= sc.T; ++t)
    for (int i = 0; i < ds.x.rows(); ++i)
      out << 's' << i << ',' << t << ',' << ds.x(i, t) << '\n';
}

std::string ResultsWriter::header(int n_beta) {
  std::string h = "t,alpha";
  for (int i = 0; i < n_beta; ++i) h += ",beta_" + std::to_string(i);
  h += ",sigma2,phi,phi_lo,phi_hi,mean_ess,step_seconds";
  return h;
}

ResultsWriter::ResultsWriter(const std::string& path, int n_beta, bool append)
    : path_(path), n_beta_(n_beta) {
  const bool exists = static_cast<bool>(std::ifstream(path));
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw DataError("cannot open results file '" + path + "'");
  out_.precision(17);
  if (!append || !exists) out_ << header(n_beta) << '\n' << std::flush;
}

void ResultsWriter::write_row(const engine::StepSummary& s) {
  out_ << s.t << ',' << s.theta_hat.alpha;
  for (int i = 0; i < n_beta_; ++i) out_ << ',' << s.theta_hat.beta(i);
  out_ << ',' << s.theta_hat.sigma2 << ',' << s.table.phi_hat << ','
       << s.table.ci_lo << ',' << s.table.ci_hi << ',' << s.mean_ess << ','
       << s.step_seconds << '\n';
  out_.flush();  // line-oriented: a crash leaves a valid prefix
}

std::vector<ResultsRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("results file is empty");
  const auto header = split_csv_line(line);
  const int n_beta = static_cast<int>(header.size()) - 8;
  if (n_beta < 1)
    throw DataError("results file header does not match the schema");
  std::vector<ResultsRow> rows;
  int rownum = 1;
  while (std::getline(in, line)) {
    ++rownum;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError("results row " + std::to_string(rownum) + " is malformed");
    ResultsRow r;
    std::size_t c = 0;
    r.t = static_cast<int>(parse_number(f[c], rownum, "t")); ++c;
    r.alpha = parse_number(f[c], rownum, "alpha"); ++c;
    for (int i = 0; i < n_beta; ++i) {
      r.beta.push_back(parse_number(f[c], rownum, "beta")); ++c;
    }
    r.sigma2 = parse_number(f[c], rownum, "sigma2"); ++c;
    r.phi = parse_number(f[c], rownum, "phi"); ++c;
    r.phi_lo = parse_number(f[c], rownum, "phi_lo"); ++c;
    r.phi_hi = parse_number(f[c], rownum, "phi_hi"); ++c;
    r.mean_ess = parse_number(f[c], rownum, "mean_ess"); ++c;
    r.step_seconds = parse_number(f[c], rownum, "step_seconds");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_sidecar(const std::string& results_path, const RunConfig& config,
                   const std::string& extra_tag) {
  nlohmann::json j;
  j["config"] = config.to_json();
  j["seed"] = config.engine.seed;
  j["version"] = kVersion;
  if (!extra_tag.empty()) j["tag"] = extra_tag;
  std::ofstream out(results_path + ".json");
  if (!out) throw DataError("cannot write sidecar for '" + results_path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace sebf::io
