#include "varlab/protocol.hpp"

#include <omp.h>

#include <algorithm>
#include <mutex>
#include <thread>

#include "varlab/errors.hpp"

namespace varlab {

void ExperimentPlan::validate() const {
    if (replicates < 2) {
        throw ValidationError("plan " + name + ": R must be >= 2");
    }
    if (bitflip && !varied.empty()) {
        throw ValidationError("plan " + name + ": bit-flip excludes varying other sources");
    }
    if (!bitflip && varied.empty()) {
        throw ValidationError("plan " + name + ": no varied source");
    }
}

Condition build_plan(const ExperimentPlan& plan) {
    plan.validate();
    Condition condition;
    condition.name = plan.name;
    condition.plan_name = plan.name;
    condition.model = plan.model;
    condition.config = plan.config;
    condition.dataset = plan.dataset;
    for (int r = 1; r <= plan.replicates; ++r) {
        RunInputs inputs;
        inputs.replicate = r - 1;
        for (int s = 0; s < kNumSources; ++s) {
            inputs.seeds.set(static_cast<SourceId>(s), plan.fixed_seed);
        }
        inputs.seeds.set(SourceId::LowLevelNoise, SeedVector::kNoiseOff);
        for (SourceId s : plan.varied) {
            inputs.seeds.set(s, static_cast<std::uint64_t>(r));
        }
        if (plan.bitflip) {
            inputs.bitflip_seed = static_cast<std::uint64_t>(r);
        }
        condition.runs.push_back(inputs);
    }
    return condition;
}

std::vector<Condition> onset_sweep(const ExperimentPlan& base, const std::vector<int>& onsets,
                                   int epochs) {
    base.validate();
    if (base.varied.size() != 1 || base.bitflip) {
        throw ValidationError("plan " + base.name + ": onset requires exactly one varied source");
    }
    const SourceId source = *base.varied.begin();
    std::vector<Condition> conditions;
    for (int onset : onsets) {
        if (onset < 0 || onset >= epochs) {
            throw ValidationError("plan " + base.name + ": onset epoch " +
                                  std::to_string(onset) + " out of [0, epochs)");
        }
        Condition condition;
        condition.name = base.name + "@onset" + std::to_string(onset);
        condition.plan_name = base.name;
        condition.model = base.model;
        condition.config = base.config;
        condition.dataset = base.dataset;
        condition.onset_epoch = onset;
        for (int r = 1; r <= base.replicates; ++r) {
            RunInputs inputs;
            inputs.replicate = r - 1;
            for (int s = 0; s < kNumSources; ++s) {
                inputs.seeds.set(static_cast<SourceId>(s), base.fixed_seed);
            }
            inputs.seeds.set(SourceId::LowLevelNoise, SeedVector::kNoiseOff);
            inputs.onset = OnsetSwitch{source, static_cast<std::uint64_t>(r), onset};
            condition.runs.push_back(inputs);
        }
        conditions.push_back(std::move(condition));
    }
    return conditions;
}

std::vector<RunRecord> ConditionResult::take_records() {
    std::vector<RunRecord> out;
    out.reserve(records.size());
    for (auto& r : records) {
        if (!r) throw ValidationError("condition result incomplete");
        out.push_back(std::move(*r));
    }
    return out;
}

std::vector<std::string> condition_run_ids(const Condition& condition,
                                           const std::string& config_digest) {
    std::vector<std::string> ids;
    ids.reserve(condition.runs.size());
    for (const RunInputs& inputs : condition.runs) {
        ids.push_back(run_id_for(config_digest, inputs));
    }
    return ids;
}

ConditionResult run_condition(const Condition& condition, const ResolvedAssets& assets,
                              RunStore& store, int parallelism) {
    const int n = static_cast<int>(condition.runs.size());
    ConditionResult result;
    result.records.resize(static_cast<std::size_t>(n));

    const int workers = std::max(1, std::min(parallelism, n));
    // Split OpenMP threads across workers so run-level parallelism does
    // not oversubscribe the kernel-level teams.
    const int omp_per_worker =
        std::max(1, static_cast<int>(std::thread::hardware_concurrency()) / workers);

    std::mutex mutex;
    std::atomic<int> next{0};
    auto work = [&] {
        omp_set_num_threads(omp_per_worker);
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            const RunInputs& inputs = condition.runs[static_cast<std::size_t>(i)];
            const std::string run_id = run_id_for(assets.config_digest, inputs);
            try {
                if (store.contains(run_id)) {
                    RunRecord record = store.load(run_id);
                    std::lock_guard<std::mutex> lock(mutex);
                    result.records[static_cast<std::size_t>(i)] = std::move(record);
                    continue;
                }
                RunRecord record = train_run(*assets.model, *assets.config, *assets.train,
                                             *assets.test, inputs, assets.config_digest);
                store.save(record);
                std::lock_guard<std::mutex> lock(mutex);
                result.records[static_cast<std::size_t>(i)] = std::move(record);
                result.executed += 1;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mutex);
                result.failures.push_back(
                    RunFailure{inputs.replicate, run_id,
                               condition.name + " replicate " +
                                   std::to_string(inputs.replicate) + ": " + e.what()});
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        omp_set_num_threads(static_cast<int>(std::thread::hardware_concurrency()));
    }

    std::sort(result.failures.begin(), result.failures.end(),
              [](const RunFailure& a, const RunFailure& b) { return a.replicate < b.replicate; });
    return result;
}

}  // namespace varlab
