#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lores/errors.hpp"
#include "lores/model/nmt.hpp"
#include "lores/text.hpp"

namespace lores::model {

namespace {

constexpr char kParamsMagic[] = "LRNMT-PARAMS-V1";

void put_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        std::ofstream out(dir + "/params.bin", std::ios::binary | std::ios::trunc);
        if (!out) fail("IoError", "cannot write " + dir + "/params.bin");
        out.write(kParamsMagic, sizeof(kParamsMagic));
        put_u32(out, static_cast<uint32_t>(ck.params.tensors.size()));
        for (size_t i = 0; i < ck.params.tensors.size(); ++i) {
            const auto& name = ck.params.names[i];
            const auto& t = ck.params.tensors[i];
            put_u32(out, static_cast<uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put_u32(out, static_cast<uint32_t>(t.rows()));
            put_u32(out, static_cast<uint32_t>(t.cols()));
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(sizeof(float) * t.size()));
        }
        if (!out) fail("IoError", "write failed on " + dir + "/params.bin");
    }

    write_file(dir + "/config.json", ck.config.to_json());
    write_file(dir + "/vocab.src", ck.src_vocab.serialize());
    write_file(dir + "/vocab.tgt", ck.tgt_vocab.serialize());
    write_merges(ck.merges_src, dir + "/merges.src");
    write_merges(ck.merges_tgt, dir + "/merges.tgt");

    nlohmann::json meta;
    meta["version"] = 1;
    meta["seed"] = ck.seed;
    meta["updates"] = ck.updates;
    meta["best_update"] = ck.best_update;
    meta["dev_loss_trace"] = ck.dev_loss_trace;
    meta["src_vocab_size"] = ck.src_vocab.size();
    meta["tgt_vocab_size"] = ck.tgt_vocab.size();
    write_file(dir + "/meta.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
    Checkpoint ck;
    ck.config = ModelConfig::from_json(read_file(dir + "/config.json"));
    ck.src_vocab = Vocab::deserialize(read_file(dir + "/vocab.src"));
    ck.tgt_vocab = Vocab::deserialize(read_file(dir + "/vocab.tgt"));
    ck.merges_src = read_merges(dir + "/merges.src");
    ck.merges_tgt = read_merges(dir + "/merges.tgt");

    const nlohmann::json meta = nlohmann::json::parse(read_file(dir + "/meta.json"));
    ck.seed = meta.at("seed").get<uint64_t>();
    ck.updates = meta.at("updates").get<int64_t>();
    ck.best_update = meta.at("best_update").get<int64_t>();
    ck.dev_loss_trace = meta.at("dev_loss_trace").get<std::vector<double>>();

    // Rebuild the expected layout so shapes are validated against config
    // and vocab sizes rather than trusted from the file.
    Transformer<float> shape(ck.config, ck.src_vocab.size(), ck.tgt_vocab.size());
    ck.params = shape.params();

    std::ifstream in(dir + "/params.bin", std::ios::binary);
    if (!in) fail("IoError", "cannot open " + dir + "/params.bin");
    char magic[sizeof(kParamsMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kParamsMagic, sizeof(kParamsMagic)) != 0)
        fail("BadCheckpoint", dir + "/params.bin has an unrecognized header");
    const uint32_t n = get_u32(in);
    if (n != ck.params.tensors.size())
        fail("BadCheckpoint", "tensor count mismatch in " + dir + "/params.bin");
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint32_t rows = get_u32(in);
        const uint32_t cols = get_u32(in);
        if (!in || name != ck.params.names[i] ||
            rows != static_cast<uint32_t>(ck.params.tensors[i].rows()) ||
            cols != static_cast<uint32_t>(ck.params.tensors[i].cols()))
            fail("BadCheckpoint", "tensor '" + name + "' does not match the model layout");
        in.read(reinterpret_cast<char*>(ck.params.tensors[i].data()),
                static_cast<std::streamsize>(sizeof(float) * ck.params.tensors[i].size()));
        if (!in) fail("BadCheckpoint", "truncated params.bin at tensor '" + name + "'");
    }
    return ck;
}

}  // namespace lores::model
