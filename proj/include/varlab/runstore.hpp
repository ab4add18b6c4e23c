#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "varlab/mitigation.hpp"
#include "varlab/train.hpp"

namespace varlab {

/// Content-addressed, append-only store of completed runs.
///
/// A run directory is complete when its manifest lists every artifact with
/// a matching digest; anything else (in particular, the staging directory
/// of a killed run) is ignored. Writes stage into staging/ and publish
/// with one atomic rename, so a crash can never produce a directory that
/// load() accepts.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path run_dir(const std::string& run_id) const;

    /// True iff a complete, digest-valid run directory exists.
    bool contains(const std::string& run_id) const;

    /// Load a complete run back into memory, verifying every digest.
    RunRecord load(const std::string& run_id) const;

    /// Persist a run atomically. No-op if the run already exists.
    void save(const RunRecord& record);

    /// Run ids of all complete runs.
    std::vector<std::string> list() const;

    /// Mitigated predictions cached beside a run (same binary header).
    /// Derived artifacts: not part of the completeness manifest.
    void save_aux_preds(const std::string& run_id, const std::string& filename,
                        const PredictionMatrix& preds) const;
    std::optional<PredictionMatrix> load_aux_preds(const std::string& run_id,
                                                   const std::string& filename) const;

private:
    std::filesystem::path root_;
    mutable std::mutex mutex_;
};

}  // namespace varlab
