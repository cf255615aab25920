#pragma once

// Config-driven front end: parses a JSON run config, executes the named
// command, and writes byte-stable JSON reports plus map CSVs.

#include "mfvi/report.hpp"

#include <string>

namespace mfvi {

// Executes the config at `path`. Reports and artifacts land in the config's
// output_dir (overridable via the MFVI_OUTPUT_DIR environment variable).
// Returns 0 on success, 2 on ConvergenceError, 3 on parameter/domain errors;
// failures also emit machine-readable error JSON on stdout.
int run_config_file(const std::string& path);

// The oracle-check suite (also reachable as command "oracle-check"): runs the
// Gaussian + 2-d brute-force checks against the committed fixture, returns
// the report; all_pass flag inside.
Jv oracle_check(std::uint64_t seed, const std::string& fixture_path,
                bool* all_pass = nullptr);

// Repository-relative default fixture path resolution (checks ./data and the
// directory given by MFVI_DATA_DIR).
std::string default_fixture_path();

// Canonical parameter string hashed into a fixture's input_hash; shared by
// the generator and the oracle-check validator.
std::string fixture_input_string(const MatrixXd& P, const VectorXd& w,
                                 const VectorXd& a, double c, int grid_points,
                                 double span);

}  // namespace mfvi
