#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sebf/config.hpp"
#include "sebf/engine.hpp"
#include "sebf/simkit.hpp"

namespace sebf::io {

/// A parsed observation table: sites in first-appearance order, one
/// ObsSlice per day 1..T with duplicate (site, day) rows aggregated by
/// summing counts and exposures, and absent (site, day) pairs masked.
struct IngestResult {
  std::vector<std::string> site_ids;
  Eigen::MatrixXd coords;                 // n x dim
  int T = 0;
  std::vector<spatial::ObsSlice> slices;  // index t-1 holds day t

  spatial::SiteSet sites() const { return spatial::SiteSet(coords); }
};

IngestResult ingest(std::istream& in, const ColumnMap& columns,
                    const spatial::ObservationFamily& family);
IngestResult ingest_file(const std::string& path, const ColumnMap& columns,
                         const spatial::ObservationFamily& family);

/// Canonical observation CSV from a simulated dataset (day = 1..T rows,
/// missing entries omitted rather than zero-filled).
void write_dataset_csv(std::ostream& out, const sim::Scenario& sc,
                       const sim::Dataset& ds, const ColumnMap& columns);
void write_truth_csv(std::ostream& out, const sim::Scenario& sc,
                     const sim::Dataset& ds);

/// Append-only results stream: one line per absorbed time step, flushed per
/// row so a crash leaves a valid prefix.
class ResultsWriter {
 public:
  ResultsWriter(const std::string& path, int n_beta, bool append);
  void write_row(const engine::StepSummary& s);
  const std::string& path() const { return path_; }

  static std::string header(int n_beta);

 private:
  std::string path_;
  int n_beta_;
  std::ofstream out_;
};

struct ResultsRow {
  int t = 0;
  double alpha = 0.0;
  std::vector<double> beta;
  double sigma2 = 0.0;
  double phi = 0.0;
  double phi_lo = 0.0;
  double phi_hi = 0.0;
  double mean_ess = 0.0;
  double step_seconds = 0.0;
};

std::vector<ResultsRow> read_results_csv(const std::string& path);

/// Config + seed + version sidecar making every results file self-describing.
void write_sidecar(const std::string& results_path, const RunConfig& config,
                   const std::string& extra_tag = "");

}  // namespace sebf::io
