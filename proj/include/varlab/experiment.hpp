#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "varlab/dataset.hpp"
#include "varlab/metrics.hpp"
#include "varlab/mitigation.hpp"
#include "varlab/protocol.hpp"

namespace varlab {

struct MnistFile {
    std::string url;
    std::string sha256;
};

struct MnistSpec {
    std::filesystem::path dir = "data/mnist";
    int n_train = 2000;
    int n_test = 1000;
    // keys: train_images, train_labels, test_images, test_labels
    std::map<std::string, MnistFile> files;
};

struct DatasetDef {
    std::string name;
    std::variant<SynthSpec, MnistSpec> spec;

    bool is_synth() const { return std::holds_alternative<SynthSpec>(spec); }
};

/// A plan as declared in the experiment file: the protocol plan plus the
/// analyze-time options attached to it.
struct PlanDef {
    ExperimentPlan plan;
    std::vector<int> onsets;           // non-empty = onset sweep
    std::optional<TtaSpec> tta;        // analyze computes TTA variants
    bool snapshot_mitigation = false;  // analyze computes snapshot variants
};

struct GlobalOptions {
    int bootstrap_reps = 1000;
    std::uint64_t bootstrap_seed = 1;
    bool cka = false;
    int cka_pair_cap = 25;
    std::uint64_t cka_subset_seed = 1;
    std::uint64_t fixed_seed = 1;
};

/// Parsed experiment file. Unknown keys and dangling references are
/// rejected at load time.
struct ExperimentFile {
    std::filesystem::path base_dir;
    std::map<std::string, DatasetDef> datasets;
    std::map<std::string, ModelSpec> models;
    std::map<std::string, TrainConfig> configs;
    std::vector<PlanDef> plans;
    GlobalOptions options;

    const ModelSpec& model(const std::string& name) const;
    const TrainConfig& config(const std::string& name) const;
    const DatasetDef& dataset(const std::string& name) const;
    const PlanDef& plan(const std::string& name) const;
};

ExperimentFile load_experiment(const std::filesystem::path& path);

/// Every condition the file expands to (onset plans contribute one
/// condition per onset epoch), in declaration order.
std::vector<Condition> all_conditions(const ExperimentFile& experiment);

/// Digest over (model spec, train config, dataset identity); the first
/// half of a run's content address.
std::string config_digest_for(const ExperimentFile& experiment, const std::string& model,
                              const std::string& config, const std::string& dataset);

/// Loads/generates datasets on first use and caches them. MNIST defs read
/// IDX files from their directory (see fetch()).
class DatasetCache {
public:
    explicit DatasetCache(const ExperimentFile* experiment) : experiment_(experiment) {}

    const std::pair<Dataset, Dataset>& get(const std::string& name);
    DatasetManifest manifest(const std::string& name);

    /// Download any missing MNIST files for `name` (checksummed).
    void fetch(const std::string& name);

private:
    const ExperimentFile* experiment_;
    std::map<std::string, std::pair<Dataset, Dataset>> cache_;
};

}  // namespace varlab
