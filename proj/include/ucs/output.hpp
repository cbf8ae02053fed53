#pragma once

#include "ucs/harness.hpp"

#include <ostream>
#include <string>

namespace ucs {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCsvHeader =
    "schema_version,kind,N,M,R,p,rho,snr_db,seed,trial,nrmse_x,hd_u,"
    "iterations,converged,se_nrmse,wall_ms";

/// %.17g formatting shared by both writers.
std::string format_double(double v);

class RecordWriter {
 public:
  virtual ~RecordWriter() = default;
  virtual void write(const TrialRecord& rec) = 0;
};

class CsvWriter : public RecordWriter {
 public:
  explicit CsvWriter(std::ostream& out, ExperimentKind kind);
  void write(const TrialRecord& rec) override;

 private:
  std::ostream& out_;
  ExperimentKind kind_;
};

class JsonlWriter : public RecordWriter {
 public:
  explicit JsonlWriter(std::ostream& out, ExperimentKind kind);
  void write(const TrialRecord& rec) override;

 private:
  std::ostream& out_;
  ExperimentKind kind_;
};

}  // namespace ucs
