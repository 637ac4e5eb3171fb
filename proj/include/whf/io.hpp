#pragma once

#include "whf/density.hpp"
#include "whf/dynamics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

/// \file io.hpp
/// CSV serialization of trajectories and density grids. Numbers are written
/// with 17 significant digits so a round trip through text is exact.

namespace whf {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Header `t,agent,x,y,qx,qy`, one row per (sample, agent), time-major.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t,agent,x,y,qx,qy\n";
    for (std::size_t k = 0; k < traj.n_samples(); ++k) {
        const std::string t = format_number(traj.times[k]);
        const auto& agents = traj.states[k].agents;
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const auto& a = agents[i];
            os << t << ',' << i << ',' << format_number(a.X.x) << ',' << format_number(a.X.y) << ','
               << format_number(a.q.x) << ',' << format_number(a.q.y) << '\n';
        }
    }
}

/// Inverse of write_trajectory_csv. Rows must be time-major with agents
/// numbered 0..N-1 at every sample.
inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "t,agent,x,y,qx,qy") throw IoError("trajectory CSV header mismatch");
    Trajectory traj;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        double t, x, y, qx, qy;
        unsigned long agent;
        if (std::sscanf(line.c_str(), "%lf,%lu,%lf,%lf,%lf,%lf", &t, &agent, &x, &y, &qx, &qy) != 6)
            throw IoError("malformed trajectory CSV row " + std::to_string(row));
        if (agent == 0) {
            traj.times.push_back(t);
            traj.states.push_back(SwarmState{t, {}});
        }
        if (traj.states.empty() || agent != traj.states.back().agents.size() || traj.times.back() != t)
            throw IoError("trajectory CSV rows out of order at row " + std::to_string(row));
        traj.states.back().agents.push_back({{x, y}, {qx, qy}});
    }
    return traj;
}

/// Two header lines (`xmin,xmax,ymin,ymax,nx,ny` and their values), then ny
/// rows of nx values; row j holds the cells at y_center(j).
inline void write_density_csv(std::ostream& os, const DensityGrid& d) {
    const GridSpec& g = d.grid;
    os << "xmin,xmax,ymin,ymax,nx,ny\n"
       << format_number(g.xmin) << ',' << format_number(g.xmax) << ',' << format_number(g.ymin) << ','
       << format_number(g.ymax) << ',' << g.n << ',' << g.n << '\n';
    for (std::size_t j = 0; j < g.n; ++j) {
        for (std::size_t i = 0; i < g.n; ++i) {
            if (i) os << ',';
            os << format_number(d.values[j * g.n + i]);
        }
        os << '\n';
    }
}

inline DensityGrid read_density_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "xmin,xmax,ymin,ymax,nx,ny") throw IoError("density CSV header mismatch");
    GridSpec g;
    unsigned long nx = 0, ny = 0;
    if (!std::getline(is, line) ||
        std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lu,%lu", &g.xmin, &g.xmax, &g.ymin, &g.ymax, &nx, &ny) != 6 ||
        nx != ny)
        throw IoError("malformed density CSV bounds line");
    g.n = nx;
    DensityGrid d{g, {}, g.cell_area()};
    d.values.reserve(g.cells());
    for (std::size_t j = 0; j < g.n; ++j) {
        if (!std::getline(is, line)) throw IoError("density CSV has too few rows");
        std::istringstream row(line);
        std::string cell;
        std::size_t count = 0;
        while (std::getline(row, cell, ',')) {
            d.values.push_back(std::stod(cell));
            ++count;
        }
        if (count != g.n) throw IoError("density CSV row " + std::to_string(j) + " has the wrong width");
    }
    return d;
}

/// Writes `content` produced by `fill` to `path`, creating parent directories.
template <class Fill>
void write_file(const std::filesystem::path& path, Fill&& fill) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    fill(os);
    os.flush();
    if (!os) throw IoError("write to " + path.string() + " failed");
}

} // namespace whf
