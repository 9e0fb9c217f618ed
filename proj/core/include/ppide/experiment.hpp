#pragma once

#include <cstdint>
#include <string>

namespace ppide {

// A parsed experiment description.  `raw` keeps the canonical JSON text; the
// typed fields mirror the parts the launcher needs before dispatch.  All
// deeper validation happens inside run().
struct ExperimentConfig {
    std::string kind;
    std::uint64_t seed = 1;
    std::string raw;

    static ExperimentConfig fromFile(const std::string& path);
    static ExperimentConfig fromText(const std::string& text);
};

struct RunResult {
    std::string reportJson;              // pretty-printed, sorted keys
    std::string configHash;              // FNV-1a of the canonical config
};

// Execute the experiment.  If outDir is non-empty, report.json (and any
// kind-specific CSV artifacts) are written there.
RunResult run(const ExperimentConfig& cfg, const std::string& outDir = "");

} // namespace ppide
