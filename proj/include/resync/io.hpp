#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "resync/common_lines.hpp"
#include "resync/eval.hpp"
#include "resync/so3.hpp"
#include "resync/solver.hpp"

namespace resync {

/// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double v);

/// Rotation-set text format: first line "K=<int>", then K lines of nine
/// decimal floats, row-major.
void write_rotation_set(const std::filesystem::path& path,
                        const RotationSet& set);
RotationSet read_rotation_set(const std::filesystem::path& path);

/// Common-line text format: header "K=<int> ntheta=<int>", then one line per
/// pair in lexicographic order. For ntheta > 0 the line is
/// "i j a_ij a_ji" with integer angle bins in [0, ntheta); vectors are
/// reconstructed as (cos(2 pi a / ntheta), sin(2 pi a / ntheta), 0).
/// For ntheta = 0 (continuous sets) the line carries the in-plane components
/// "i j x_ij y_ij x_ji y_ji" in full precision.
void write_common_lines(const std::filesystem::path& path,
                        const CommonLineSet& set);
CommonLineSet read_common_lines(const std::filesystem::path& path);

/// Iteration-trace CSV with header "iter,mu,objective,mse,theta,seconds";
/// mse and theta cells are empty when unavailable.
void write_trace_csv(const std::filesystem::path& path,
                     const IterationTrace& trace);

/// "mse,flipped" line of an EvalReport.
std::string eval_report_csv(const EvalReport& report);

/// Line-oriented "key=value" file. '#' starts a comment; blank lines are
/// skipped. Duplicate keys keep the last value.
std::map<std::string, std::string> read_kv_file(
    const std::filesystem::path& path);

/// Applies key=value entries mirroring SolverConfig fields (method, rho1,
/// rho2, step0, schedule, beta, max_iters, tol, reshuffle, norm_alpha, seed)
/// on top of `base`. Unknown keys raise IoError.
SolverConfig apply_solver_config(
    const std::map<std::string, std::string>& kv, SolverConfig base = {});

/// Assigns the single "rho" shorthand to the ratio(s) the method leaves
/// free: rho2 for sgd, rho1 for bcd, both for bsgd (and full, where any
/// value other than 1 is rejected by the solver).
void apply_filter_ratio(SolverConfig& cfg, double rho);

Method parse_method(const std::string& name);
StepSchedule parse_schedule(const std::string& name);
std::string method_name(Method m);
std::string schedule_name(StepSchedule s);

}  // namespace resync
