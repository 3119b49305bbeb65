#include "lores/model/config.hpp"

#include <nlohmann/json.hpp>

#include "lores/errors.hpp"

namespace lores::model {

Preset preset_from_name(const std::string& name) {
    if (name == "defaults") return Preset::defaults;
    if (name == "our_models") return Preset::our_models;
    if (name == "larger") return Preset::larger;
    if (name == "many_to_many") return Preset::many_to_many;
    fail("UnknownPreset", "'" + name + "' (expected defaults|our_models|larger|many_to_many)");
}

const char* preset_name(Preset p) {
    switch (p) {
        case Preset::defaults: return "defaults";
        case Preset::our_models: return "our_models";
        case Preset::larger: return "larger";
        case Preset::many_to_many: return "many_to_many";
    }
    return "?";
}

ModelConfig make_config(Preset preset) {
    ModelConfig cfg;
    switch (preset) {
        case Preset::defaults:
            cfg.layers = 6;
            cfg.embedding_size = 512;
            cfg.model_size = 512;
            cfg.attention_heads = 8;
            cfg.feed_forward = 2048;
            break;
        case Preset::our_models:
            cfg.layers = 3;
            cfg.embedding_size = 256;
            cfg.model_size = 256;
            cfg.attention_heads = 4;
            cfg.feed_forward = 1024;
            break;
        case Preset::larger:
            cfg.layers = 4;
            cfg.embedding_size = 384;
            cfg.model_size = 384;
            cfg.attention_heads = 6;
            cfg.feed_forward = 1536;
            break;
        case Preset::many_to_many:
            cfg.layers = 4;
            cfg.embedding_size = 512;
            cfg.model_size = 512;
            cfg.attention_heads = 8;
            cfg.feed_forward = 2048;
            break;
    }
    cfg.dropout = 0.3;
    cfg.label_smoothing = 0.1;
    cfg.validate();
    return cfg;
}

void ModelConfig::validate() const {
    if (layers < 1) fail("InvalidModelConfig", "layers must be >= 1");
    if (model_size < 1 || embedding_size < 1 || feed_forward < 1 || attention_heads < 1)
        fail("InvalidModelConfig", "dimensions must be positive");
    if (embedding_size != model_size)
        fail("InvalidModelConfig", "embedding_size must equal model_size");
    if (model_size % attention_heads != 0)
        fail("InvalidModelConfig", "model_size must be divisible by attention_heads");
    if (dropout < 0.0 || dropout >= 1.0) fail("InvalidModelConfig", "dropout must be in [0,1)");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0)
        fail("InvalidModelConfig", "label_smoothing must be in [0,1)");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["layers"] = layers;
    j["embedding_size"] = embedding_size;
    j["model_size"] = model_size;
    j["attention_heads"] = attention_heads;
    j["feed_forward"] = feed_forward;
    j["dropout"] = dropout;
    j["label_smoothing"] = label_smoothing;
    j["shared_embeddings"] = shared_embeddings;
    return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    ModelConfig cfg;
    cfg.layers = j.at("layers").get<int>();
    cfg.embedding_size = j.at("embedding_size").get<int>();
    cfg.model_size = j.at("model_size").get<int>();
    cfg.attention_heads = j.at("attention_heads").get<int>();
    cfg.feed_forward = j.at("feed_forward").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.label_smoothing = j.at("label_smoothing").get<double>();
    cfg.shared_embeddings = j.at("shared_embeddings").get<bool>();
    cfg.validate();
    return cfg;
}

int64_t parameter_count(const ModelConfig& cfg, int src_vocab, int tgt_vocab) {
    const int64_t d = cfg.model_size;
    const int64_t ff = cfg.feed_forward;
    const int64_t attn = 4 * d * d + 4 * d;       // Wq,Wk,Wv,Wo + biases
    const int64_t ffn = 2 * d * ff + ff + d;      // W1,b1,W2,b2
    const int64_t ln = 2 * d;                      // gain + bias
    const int64_t enc_layer = attn + ffn + 2 * ln;
    const int64_t dec_layer = 2 * attn + ffn + 3 * ln;
    int64_t total = cfg.layers * (enc_layer + dec_layer) + 2 * ln;  // + final norms
    if (cfg.shared_embeddings)
        total += static_cast<int64_t>(std::max(src_vocab, tgt_vocab)) * d;
    else
        total += static_cast<int64_t>(src_vocab) * d + static_cast<int64_t>(tgt_vocab) * d;
    return total;
}

}  // namespace lores::model
