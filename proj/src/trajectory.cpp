#include "dacs/trajectory.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace dacs {

void Trajectory::push(double time, const std::vector<int>& ids, const Vector& state,
                      const Vector& input, double avg) {
  t.push_back(time);
  agent_ids.push_back(ids);
  x.push_back(state);
  u.push_back(input);
  u_avg.push_back(avg);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_csv(const Trajectory& traj, const std::string& path) {
  std::string out;
  out.reserve(64 * traj.steps() * (traj.steps() ? traj.x[0].size() : 1) + 64);
  out += "t,agent,x,u,u_avg,err\n";
  char row[192];
  for (size_t k = 0; k < traj.steps(); ++k) {
    for (int a = 0; a < traj.x[k].size(); ++a) {
      std::snprintf(row, sizeof(row), "%.17g,%d,%.17g,%.17g,%.17g,%.17g\n",
                    traj.t[k], traj.agent_ids[k][a], traj.x[k](a), traj.u[k](a),
                    traj.u_avg[k], traj.x[k](a) - traj.u_avg[k]);
      out += row;
    }
  }
  write_text_atomic(path, out);
}

}  // namespace dacs
