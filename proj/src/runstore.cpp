#include "varlab/runstore.hpp"

#include <unistd.h>

#include <atomic>
#include <cinttypes>
#include <fstream>

#include "json.hpp"
#include "varlab/digest.hpp"
#include "varlab/errors.hpp"
#include "varlab/serialize.hpp"

namespace varlab {

namespace {

using nlohmann::json;

constexpr const char* kManifestName = "manifest.json";

std::string direction_name(UlpDirection d) { return d == UlpDirection::Up ? "up" : "down"; }

UlpDirection direction_from(const std::string& s) {
    if (s == "up") return UlpDirection::Up;
    if (s == "down") return UlpDirection::Down;
    throw ParseError("manifest: bad ulp direction " + s);
}

json inputs_to_json(const RunInputs& inputs) {
    json j;
    j["seeds"] = inputs.seeds.seeds;
    j["replicate"] = inputs.replicate;
    if (inputs.onset) {
        j["onset"] = {{"source", static_cast<std::uint32_t>(inputs.onset->source)},
                      {"seed", inputs.onset->seed},
                      {"epoch", inputs.onset->epoch}};
    }
    if (inputs.bitflip_seed) {
        j["bitflip_seed"] = *inputs.bitflip_seed;
    }
    return j;
}

RunInputs inputs_from_json(const json& j) {
    RunInputs inputs;
    const auto seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (seeds.size() != static_cast<std::size_t>(kNumSources)) {
        throw ParseError("manifest: seed vector has wrong length");
    }
    std::copy(seeds.begin(), seeds.end(), inputs.seeds.seeds.begin());
    inputs.replicate = j.at("replicate").get<int>();
    if (j.contains("onset")) {
        OnsetSwitch o;
        o.source = static_cast<SourceId>(j.at("onset").at("source").get<std::uint32_t>());
        o.seed = j.at("onset").at("seed").get<std::uint64_t>();
        o.epoch = j.at("onset").at("epoch").get<int>();
        inputs.onset = o;
    }
    if (j.contains("bitflip_seed")) {
        inputs.bitflip_seed = j.at("bitflip_seed").get<std::uint64_t>();
    }
    return inputs;
}

std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,test_accuracy,test_ce\n";
    char line[128];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e, history[e].train_loss,
                      history[e].test_accuracy, history[e].test_ce);
        out += line;
    }
    return out;
}

std::vector<EpochStats> history_from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("store: cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<EpochStats> history;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochStats s;
        std::size_t epoch = 0;
        if (std::sscanf(line.c_str(), "%zu,%lg,%lg,%lg", &epoch, &s.train_loss,
                        &s.test_accuracy, &s.test_ce) != 4) {
            throw ParseError("store: bad history line: " + line);
        }
        history.push_back(s);
    }
    return history;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("store: cannot write " + path.string());
    out << text;
}

}  // namespace

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_ / "runs");
    std::filesystem::create_directories(root_ / "staging");
}

std::filesystem::path RunStore::run_dir(const std::string& run_id) const {
    return root_ / "runs" / run_id;
}

bool RunStore::contains(const std::string& run_id) const {
    const auto dir = run_dir(run_id);
    if (!std::filesystem::exists(dir / kManifestName)) return false;
    try {
        json manifest;
        std::ifstream in(dir / kManifestName);
        in >> manifest;
        for (const auto& [rel, digest] : manifest.at("artifacts").items()) {
            const auto path = dir / rel;
            if (!std::filesystem::exists(path)) return false;
            if (sha256_file(path) != digest.get<std::string>()) return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void RunStore::save(const RunRecord& record) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        if (std::filesystem::exists(run_dir(record.run_id) / kManifestName)) {
            return;  // already published (identical by content addressing)
        }
    }

    static std::atomic<std::uint64_t> counter{0};
    const std::string nonce = std::to_string(::getpid()) + "." +
                              std::to_string(counter.fetch_add(1));
    const auto stage = root_ / "staging" / (record.run_id + "." + nonce);
    std::filesystem::create_directories(stage);
    std::filesystem::create_directories(stage / "activations");
    if (!record.snapshot_preds.empty()) {
        std::filesystem::create_directories(stage / "snapshots");
    }

    json artifacts = json::object();
    auto put = [&](const std::string& rel) {
        artifacts[rel] = sha256_file(stage / rel);
    };

    write_params(stage / "params.bin", stage / "params.json", record.final_params);
    put("params.bin");
    put("params.json");
    write_prediction_matrix(stage / "preds.bin", record.final_preds);
    put("preds.bin");
    write_text(stage / "history.csv", history_csv(record.history));
    put("history.csv");
    for (const auto& [layer, rows] : record.activations) {
        const std::string rel = "activations/" + layer + ".bin";
        write_matrix(stage / rel, rows);
        put(rel);
    }
    for (std::size_t k = 0; k < record.snapshot_preds.size(); ++k) {
        const std::string preds_rel = "snapshots/preds_" + std::to_string(k) + ".bin";
        write_prediction_matrix(stage / preds_rel, record.snapshot_preds[k]);
        put(preds_rel);
        const std::string params_rel = "snapshots/params_" + std::to_string(k) + ".bin";
        const std::string sidecar_rel = "snapshots/params_" + std::to_string(k) + ".json";
        write_params(stage / params_rel, stage / sidecar_rel, record.snapshot_params[k]);
        put(params_rel);
        put(sidecar_rel);
    }

    json manifest;
    manifest["run_id"] = record.run_id;
    manifest["config_digest"] = record.config_digest;
    manifest["inputs"] = inputs_to_json(record.inputs);
    manifest["epochs"] = record.history.size();
    manifest["params_digest"] = record.params_digest;
    manifest["snapshots"] = record.snapshot_preds.size();
    if (record.bitflip) {
        manifest["bitflip"] = {{"layer", record.bitflip->layer},
                               {"index", record.bitflip->flat_index},
                               {"direction", direction_name(record.bitflip->direction)},
                               {"old_bits", record.bitflip->old_bits()},
                               {"new_bits", record.bitflip->new_bits()},
                               {"old_value", record.bitflip->old_value},
                               {"new_value", record.bitflip->new_value}};
    }
    manifest["artifacts"] = artifacts;
    write_text(stage / kManifestName, manifest.dump(2) + "\n");

    std::lock_guard<std::mutex> lock(mutex_);
    const auto final_dir = run_dir(record.run_id);
    if (std::filesystem::exists(final_dir / kManifestName)) {
        std::filesystem::remove_all(stage);  // someone else published first
        return;
    }
    std::filesystem::rename(stage, final_dir);
}

RunRecord RunStore::load(const std::string& run_id) const {
    const auto dir = run_dir(run_id);
    std::ifstream in(dir / kManifestName);
    if (!in) throw IoError("store: run " + run_id + " not found");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw ParseError("store: bad manifest for " + run_id + ": " + e.what());
    }

    for (const auto& [rel, digest] : manifest.at("artifacts").items()) {
        const auto path = dir / rel;
        if (!std::filesystem::exists(path) || sha256_file(path) != digest.get<std::string>()) {
            throw ChecksumError("store: artifact " + rel + " of run " + run_id +
                                " missing or corrupt");
        }
    }

    RunRecord record;
    record.run_id = manifest.at("run_id").get<std::string>();
    record.config_digest = manifest.at("config_digest").get<std::string>();
    record.inputs = inputs_from_json(manifest.at("inputs"));
    record.params_digest = manifest.at("params_digest").get<std::string>();
    record.history = history_from_csv(dir / "history.csv");
    record.final_params = read_params(dir / "params.bin", dir / "params.json");
    record.final_preds = read_prediction_matrix(dir / "preds.bin");
    if (manifest.contains("bitflip")) {
        BitFlipDescriptor d;
        const auto& b = manifest.at("bitflip");
        d.layer = b.at("layer").get<std::string>();
        d.flat_index = b.at("index").get<std::int64_t>();
        d.direction = direction_from(b.at("direction").get<std::string>());
        d.old_value = b.at("old_value").get<float>();
        d.new_value = b.at("new_value").get<float>();
        record.bitflip = d;
    }
    const std::size_t snapshots = manifest.at("snapshots").get<std::size_t>();
    for (std::size_t k = 0; k < snapshots; ++k) {
        record.snapshot_preds.push_back(
            read_prediction_matrix(dir / ("snapshots/preds_" + std::to_string(k) + ".bin")));
        record.snapshot_params.push_back(
            read_params(dir / ("snapshots/params_" + std::to_string(k) + ".bin"),
                        dir / ("snapshots/params_" + std::to_string(k) + ".json")));
    }
    for (const auto& [rel, digest] : manifest.at("artifacts").items()) {
        if (rel.rfind("activations/", 0) == 0) {
            const std::string layer = rel.substr(12, rel.size() - 12 - 4);
            record.activations[layer] = read_matrix(dir / rel);
        }
    }
    return record;
}

std::vector<std::string> RunStore::list() const {
    std::vector<std::string> ids;
    const auto runs = root_ / "runs";
    if (!std::filesystem::exists(runs)) return ids;
    for (const auto& entry : std::filesystem::directory_iterator(runs)) {
        if (entry.is_directory() && contains(entry.path().filename().string())) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void RunStore::save_aux_preds(const std::string& run_id, const std::string& filename,
                              const PredictionMatrix& preds) const {
    write_prediction_matrix(run_dir(run_id) / filename, preds);
}

std::optional<PredictionMatrix> RunStore::load_aux_preds(const std::string& run_id,
                                                         const std::string& filename) const {
    const auto path = run_dir(run_id) / filename;
    if (!std::filesystem::exists(path)) return std::nullopt;
    return read_prediction_matrix(path);
}

}  // namespace varlab
