#pragma once

#include <string>

namespace lores::model {

enum class Preset { defaults, our_models, larger, many_to_many };

Preset preset_from_name(const std::string& name);
const char* preset_name(Preset p);

struct ModelConfig {
    int layers = 6;            // encoder and decoder depth
    int embedding_size = 512;
    int model_size = 512;
    int attention_heads = 8;
    int feed_forward = 2048;
    double dropout = 0.3;
    double label_smoothing = 0.1;
    bool shared_embeddings = false;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& json_text);
};

// The four size presets, with the recipe's dropout/label-smoothing
// defaults applied.
ModelConfig make_config(Preset preset);

// Total parameter count for a given config and vocabulary sizes.
int64_t parameter_count(const ModelConfig& cfg, int src_vocab, int tgt_vocab);

}  // namespace lores::model
