#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "badm/errors.hpp"
#include "badm/param_vector.hpp"

namespace badm {

// One row of the per-iteration record. k counts global steps (epoch * B +
// batch, 1-based); k = 0 is the initialization snapshot. loss and grad_norm_sq
// are full-data quantities at z^k; lagrangian is the consensus value L^k for
// BADM runs and coincides with the loss for baselines.
struct TraceRecord {
  std::int64_t k = 0;
  std::int64_t epoch = 0;
  std::int64_t batch = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double lagrangian = 0.0;
  double wall_ms = 0.0;
};

struct Trace {
  std::uint64_t seed = 0;
  std::string optimizer;
  std::int64_t stride = 1;          // record every stride-th k (k=0 and the last k always)
  std::int64_t grad_evals = 0;      // optimizer sub-batch gradient evaluations only
  std::vector<TraceRecord> records;

  // BADM extras, aligned with records when present. resid_terms[i] holds
  // sum_s alpha_s ||z_s^k - z^k||^2 + ||z^k - z^(k-1)||^2 for the descent
  // certificate; snapshots hold z^k for delta probing.
  std::vector<double> resid_terms;
  std::vector<ParamVector> snapshots;

  bool wants_record(std::int64_t k) const { return stride <= 1 || k % stride == 0; }
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

inline void write_trace_csv(const Trace& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_trace_csv: cannot open " + path);
  out << "k,epoch,batch,loss,grad_norm_sq,lagrangian,wall_ms\n";
  for (const auto& r : t.records) {
    out << r.k << ',' << r.epoch << ',' << r.batch << ',' << detail::fmt_double(r.loss) << ','
        << detail::fmt_double(r.grad_norm_sq) << ',' << detail::fmt_double(r.lagrangian) << ','
        << detail::fmt_double(r.wall_ms) << '\n';
  }
}

inline Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("read_trace_csv: empty file " + path);
  Trace t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    TraceRecord r;
    if (std::sscanf(line.c_str(), "%ld,%ld,%ld,%lf,%lf,%lf,%lf", &r.k, &r.epoch, &r.batch,
                    &r.loss, &r.grad_norm_sq, &r.lagrangian, &r.wall_ms) != 7)
      throw DataError("read_trace_csv: malformed row at line " + std::to_string(lineno) + " of " +
                      path);
    t.records.push_back(r);
  }
  return t;
}

}  // namespace badm
