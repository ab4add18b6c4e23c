#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "varlab/dataset.hpp"
#include "varlab/runstore.hpp"
#include "varlab/train.hpp"

namespace varlab {

/// One named experimental condition to build: which source(s) vary (or the
/// bit-flip probe), how many replicates, and the constant every held-fixed
/// source is pinned to.
struct ExperimentPlan {
    std::string name;
    std::set<SourceId> varied;
    bool bitflip = false;
    int replicates = 2;  // R
    std::uint64_t fixed_seed = 1;
    std::string model, config, dataset;  // names resolved by the experiment layer

    void validate() const;
};

/// A fully resolved condition: R run inputs differing only in the varied
/// sources' seeds (or the flip-stream seed).
struct Condition {
    std::string name;
    std::string plan_name;
    std::string model, config, dataset;
    std::optional<int> onset_epoch;
    std::vector<RunInputs> runs;
};

/// Resolve a plan: varied sources take seeds 1..R (replicate i uses seed i
/// for every varied source, the paper's joint "(i, i, ...)" pattern);
/// fixed sources take the plan constant; LowLevelNoise gets the off
/// sentinel unless varied. Bit-flip plans hold every seed at the constant
/// and assign flip-stream seeds 1..R.
Condition build_plan(const ExperimentPlan& plan);

/// One condition per onset epoch: the single varied source keeps the
/// baseline constant before the onset and switches to its per-run seed
/// from it on.
std::vector<Condition> onset_sweep(const ExperimentPlan& base, const std::vector<int>& onsets,
                                   int epochs);

struct ResolvedAssets {
    const ModelSpec* model = nullptr;
    const TrainConfig* config = nullptr;
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
    std::string config_digest;
};

struct RunFailure {
    int replicate = 0;
    std::string run_id;
    std::string message;
};

struct ConditionResult {
    std::vector<std::optional<RunRecord>> records;  // indexed by replicate
    std::vector<RunFailure> failures;
    int executed = 0;  // freshly trained (others resumed from the store)

    bool complete() const { return failures.empty(); }
    std::vector<RunRecord> take_records();
};

/// Execute (or resume from the store) all R runs of a condition across
/// `parallelism` worker threads. Results are deterministic and
/// order-independent; per-run failures come back with the run identity
/// attached instead of aborting the remaining runs.
ConditionResult run_condition(const Condition& condition, const ResolvedAssets& assets,
                              RunStore& store, int parallelism);

/// The run ids a condition resolves to, in replicate order.
std::vector<std::string> condition_run_ids(const Condition& condition,
                                           const std::string& config_digest);

}  // namespace varlab
