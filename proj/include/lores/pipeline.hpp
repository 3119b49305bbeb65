#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lores/corpus.hpp"
#include "lores/eval.hpp"
#include "lores/model/config.hpp"
#include "lores/model/nmt.hpp"
#include "lores/multiway.hpp"
#include "lores/subword.hpp"

namespace lores::pipeline {

struct CleanCfg {
    int64_t max_len = 100;
    double max_ratio = 9.0;
};

struct SplitCfg {
    double dev_frac = 0.1;
    double test_frac = 0.1;
};

struct DirectionCfg {
    LangTag src;
    LangTag tgt;
    std::string src_file;
    std::string tgt_file;
    double weight = 1.0;

    std::string name() const { return src.code + "-" + tgt.code; }
};

struct BridgeCfg {
    std::string file;  // empty disables bridging
    std::array<LangTag, 3> langs{};
    std::vector<std::pair<LangTag, LangTag>> directions;
    double weight = 1.0;

    bool enabled() const { return !file.empty(); }
};

struct BacktransCfg {
    bool enabled = false;
    std::string mono_file;
    LangTag mono_lang;
    LangTag to_lang;
    int beam = 5;
    double weight = 1.0;
    bool tag_synthetic = false;
};

struct EvalCfg {
    int beam = 4;
    double max_len_factor = 2.0;
    int64_t max_test_sentences = 0;  // 0 = score every test sentence
};

// Mirror of the config file. One file drives every stage; flags override
// keys one-for-one via --set dotted.path=value.
struct PipelineConfig {
    uint64_t seed = 1;
    std::string output_dir = "out";
    std::string dataset_label = "run";
    std::vector<LangTag> languages;
    std::map<std::string, std::vector<std::string>> lexicons;
    std::map<std::string, int64_t> subword_sizes;
    bool shared_bpe = false;
    CleanCfg clean;
    SplitCfg split;
    std::vector<DirectionCfg> directions;
    BridgeCfg bridge;
    std::string preset_name = "our_models";
    model::ModelConfig model;  // preset with overrides applied
    model::TrainSpec train;
    BacktransCfg backtrans;
    EvalCfg eval;

    std::string canonical_json;  // normalized config for hashing

    static PipelineConfig load(const std::string& path,
                               const std::vector<std::string>& overrides);
    void validate() const;
};

// Stage entry points; each writes its artifacts plus
// <output_dir>/manifests/<stage>.json and is deterministic for a fixed
// config, seed and thread count.
void stage_prepare(const PipelineConfig& cfg);
void stage_learn_bpe(const PipelineConfig& cfg);
void stage_assemble(const PipelineConfig& cfg, bool with_synthetic = false);
void stage_apply_bpe(const PipelineConfig& cfg, bool with_synthetic = false);
void stage_train(const PipelineConfig& cfg, bool with_synthetic = false);
void stage_backtranslate(const PipelineConfig& cfg);
void stage_evaluate(const PipelineConfig& cfg);

// The full recipe in order; equals the manual stage composition.
void run_pipeline(const PipelineConfig& cfg);

// Directory of the checkpoint the evaluation stages use.
std::string final_checkpoint_dir(const PipelineConfig& cfg);

// Tag + segment + translate + desegment one raw line.
std::string translate_line(const model::Checkpoint& ck, const model::Translator& translator,
                           const std::string& raw_line, const LangTag& to, int beam,
                           double max_len_factor);

// Exclusive lock on an output directory (lock file); released on
// destruction. Errors: ConcurrentRun if already locked.
class OutputLock {
public:
    explicit OutputLock(const std::string& output_dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::string path_;
};

// Writes content to <path>.tmp then renames, so partial artifacts never
// land under their final name.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace lores::pipeline
