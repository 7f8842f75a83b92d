#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mcf {

struct CriterionResult {
    int id = 0;
    std::string name;
    double expected = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;  // wall time, never written to the compared outputs
};

struct AcceptanceOptions {
    std::uint64_t seed = 2024;
    std::vector<int> only;  // empty runs 1..17
};

struct AcceptanceRun {
    std::vector<CriterionResult> results;
    // File name -> contents, written next to acceptance.csv.
    std::map<std::string, std::string> artifacts;
};

inline constexpr int kCriteria = 18;

// Criteria 1..17; a criterion that throws is recorded as failed with the message.
AcceptanceRun run_acceptance(const AcceptanceOptions& opts);

// Columns: id,expected,measured,tolerance,pass.
std::string acceptance_csv(const std::vector<CriterionResult>& results);
std::string acceptance_json(const std::vector<CriterionResult>& results, std::uint64_t seed);
std::string acceptance_table(const std::vector<CriterionResult>& results);

// Writes acceptance.csv, acceptance.json and the artifacts; returns the paths.
std::vector<std::filesystem::path> write_acceptance(const AcceptanceRun& run, std::uint64_t seed,
                                                    const std::filesystem::path& dir);

struct VerifyAll {
    AcceptanceRun run;  // includes criterion 18 when both passes ran
    std::vector<std::filesystem::path> outputs;
    bool all_pass = false;
};

// Runs the suite into dir, again into dir/rerun, compares the two sets of files
// byte for byte (criterion 18), then rewrites the tables with all rows.
VerifyAll verify_all(const AcceptanceOptions& opts, const std::filesystem::path& dir,
                     bool determinism = true);

}  // namespace mcf
