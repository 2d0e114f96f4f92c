#pragma once

#include <map>
#include <string>
#include <vector>

#include "dacs/graph.hpp"

namespace dacs {

/// Time-indexed run record shared by the CT, DT and event-triggered engines.
/// Rows are steps; each step carries the active agent ids (they change when
/// agents depart or arrive), the agreement states, the inputs and the true
/// average over the active agents.
struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<int>> agent_ids;
  std::vector<Vector> x;
  std::vector<Vector> u;
  std::vector<double> u_avg;
  // Optional per-variant internal states ("p", "q", "z", ...), stored only
  // when requested; conservation diagnostics need them.
  std::map<std::string, std::vector<Vector>> internal;

  std::string algorithm;
  std::string graph_id;
  double dt = 0.0;
  int warmup_steps = 0;  // excluded from metrics (cascade pipelines)

  size_t steps() const { return t.size(); }
  void push(double time, const std::vector<int>& ids, const Vector& state,
            const Vector& input, double avg);
};

/// Header `t,agent,x,u,u_avg,err`, one row per (step x agent), 17 significant
/// digits. Written atomically (temp file + rename).
void write_csv(const Trajectory& traj, const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace dacs
