#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "crowding/cli.hpp"

namespace crowding::cli {

namespace {

std::string hex32(std::uint32_t v) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

std::uint32_t crc_update(std::uint32_t crc, const void* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

}  // namespace

std::string make_run_id(const ExperimentConfig& config, std::string_view command,
                        const std::vector<std::string>& input_digests) {
    // Worker count and output root cannot change any artifact, so they stay
    // out of the identity.
    ExperimentConfig identity = config;
    identity.workers = 1;
    identity.out = "runs";
    std::string text = dump_config(identity);
    text += "command = " + std::string(command) + "\n";
    for (const auto& d : input_digests) text += "input = " + d + "\n";
    return "r" + hex32(crc_update(0, text.data(), text.size()));
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::uint32_t crc = 0;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) crc = crc_update(crc, buf, static_cast<std::size_t>(in.gcount()));
    return hex32(crc);
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["run_id"] = m.run_id;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["artifacts"] = m.artifacts;
    j["stages"] = m.stages;
    j["metrics"] = m.metrics;
    j["notes"] = m.notes;
    j["started"] = m.started;
    j["finished"] = m.finished;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read manifest " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        RunManifest m;
        m.run_id = j.at("run_id").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = j.at("config").get<std::string>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        m.stages = j.at("stages").get<std::map<std::string, bool>>();
        m.metrics = j.at("metrics").get<std::map<std::string, double>>();
        m.notes = j.at("notes").get<std::vector<std::string>>();
        m.started = j.at("started").get<std::string>();
        m.finished = j.at("finished").get<std::string>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed manifest " + path.string() + ": " + e.what());
    }
}

}  // namespace crowding::cli
