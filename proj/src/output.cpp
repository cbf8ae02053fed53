#include "ucs/output.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace ucs {

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, ExperimentKind kind)
    : out_(out), kind_(kind) {
  out_ << kCsvHeader << "\n";
}

void CsvWriter::write(const TrialRecord& rec) {
  out_ << kSchemaVersion << ',' << experiment_kind_name(kind_) << ','
       << rec.cell.N << ',' << rec.cell.M << ',' << rec.cell.R << ',';
  if (rec.cell.p > 0) out_ << rec.cell.p;
  out_ << ',' << format_double(rec.cell.rho) << ','
       << format_double(rec.cell.snr_db) << ',' << rec.seed << ',' << rec.trial
       << ',';
  if (rec.has_empirical && !rec.failed)
    out_ << format_double(rec.nrmse_x) << ',' << format_double(rec.hd_u) << ','
         << rec.iterations << ',' << (rec.converged ? 1 : 0);
  else
    out_ << ",,,";
  out_ << ',';
  if (rec.has_se) out_ << format_double(rec.se_nrmse);
  out_ << ',' << format_double(rec.wall_ms) << "\n";
}

JsonlWriter::JsonlWriter(std::ostream& out, ExperimentKind kind)
    : out_(out), kind_(kind) {}

void JsonlWriter::write(const TrialRecord& rec) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = experiment_kind_name(kind_);
  j["N"] = rec.cell.N;
  j["M"] = rec.cell.M;
  j["R"] = rec.cell.R;
  if (rec.cell.p > 0)
    j["p"] = rec.cell.p;
  else
    j["p"] = nullptr;
  j["rho"] = rec.cell.rho;
  j["snr_db"] = std::isinf(rec.cell.snr_db) ? nlohmann::ordered_json()
                                            : nlohmann::ordered_json(rec.cell.snr_db);
  j["seed"] = rec.seed;
  j["trial"] = rec.trial;
  if (rec.has_empirical && !rec.failed) {
    j["nrmse_x"] = rec.nrmse_x;
    j["hd_u"] = rec.hd_u;
    j["iterations"] = rec.iterations;
    j["converged"] = rec.converged;
  } else {
    j["nrmse_x"] = nullptr;
    j["hd_u"] = nullptr;
    j["iterations"] = nullptr;
    j["converged"] = nullptr;
    if (rec.failed) j["error"] = rec.fail_msg;
  }
  j["se_nrmse"] = rec.has_se ? nlohmann::ordered_json(rec.se_nrmse)
                             : nlohmann::ordered_json();
  j["wall_ms"] = rec.wall_ms;
  out_ << j.dump() << "\n";
}

}  // namespace ucs
