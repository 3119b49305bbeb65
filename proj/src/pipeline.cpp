#include "lores/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>

#include <nlohmann/json.hpp>

#include "lores/backtrans.hpp"
#include "lores/errors.hpp"
#include "lores/hash.hpp"
#include "lores/parallel.hpp"
#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace fs = std::filesystem;

namespace lores::pipeline {

namespace {

// Tokens that must pass through segmentation whole: direction tokens and
// the optional synthetic-data marker.
bool reserved_token(const std::string& w) { return is_direction_token(w) || w == "<syn>"; }

std::string join_path(const std::string& base, const std::string& rel) {
    if (rel.empty() || fs::path(rel).is_absolute()) return rel;
    return (fs::path(base) / rel).lexically_normal().string();
}

struct Manifest {
    std::string stage;
    const PipelineConfig* cfg;
    std::vector<std::pair<std::string, std::string>> artifacts;  // relpath -> hash

    void add(const std::string& relpath) {
        artifacts.emplace_back(relpath, hash_file_hex(cfg->output_dir + "/" + relpath));
    }
    void write() const {
        nlohmann::json j;
        j["stage"] = stage;
        j["config_hash"] = hash_hex(cfg->canonical_json);
        j["seed"] = cfg->seed;
        j["artifacts"] = nlohmann::json::object();
        for (const auto& [path, hash] : artifacts) j["artifacts"][path] = hash;
        fs::create_directories(cfg->output_dir + "/manifests");
        atomic_write(cfg->output_dir + "/manifests/" + stage + ".json", j.dump(2) + "\n");
    }
};

std::string out_path(const PipelineConfig& cfg, const std::string& rel) {
    return cfg.output_dir + "/" + rel;
}

void write_corpus_atomic(const Corpus& c, const std::string& src_path,
                         const std::string& tgt_path) {
    std::string src, tgt;
    for (const auto& p : c.pairs) {
        src += p.src_text;
        src += '\n';
        tgt += p.tgt_text;
        tgt += '\n';
    }
    atomic_write(src_path, src);
    atomic_write(tgt_path, tgt);
}

// Both directions over the same physical file pair must agree on split
// membership, so the split seed is keyed on the unordered file set.
uint64_t split_seed_for(const PipelineConfig& cfg, const DirectionCfg& d) {
    std::string key = std::min(d.src_file, d.tgt_file) + "|" + std::max(d.src_file, d.tgt_file);
    return derive_seed(cfg.seed, "split:" + key);
}

std::string prepared(const DirectionCfg& d, const std::string& split, const std::string& side) {
    return "data/" + d.name() + "." + split + "." + side;
}

Corpus read_prepared(const PipelineConfig& cfg, const DirectionCfg& d, const std::string& split) {
    return ingest_parallel(out_path(cfg, prepared(d, split, "src")),
                           out_path(cfg, prepared(d, split, "tgt")), d.src, d.tgt);
}

std::vector<TriRow> bridge_rows(const PipelineConfig& cfg) {
    if (!cfg.bridge.enabled()) return {};
    return ingest_trilingual(cfg.bridge.file);
}

// Bridge pairs grouped per direction so each gets its own oversampling
// weight and provenance.
std::vector<MultiwayDirection> bridge_directions(const PipelineConfig& cfg) {
    std::vector<MultiwayDirection> out;
    const auto rows = bridge_rows(cfg);
    if (rows.empty()) return out;
    const Corpus expanded = expand_bridge(rows, cfg.bridge.langs, cfg.bridge.directions);
    for (const auto& [src, tgt] : cfg.bridge.directions) {
        MultiwayDirection dir;
        dir.src = src;
        dir.tgt = tgt;
        dir.weight = cfg.bridge.weight;
        dir.corpus.provenance = "bridge:" + src.code + "-" + tgt.code;
        for (const auto& p : expanded.pairs)
            if (p.src_lang == src && p.tgt_lang == tgt) dir.corpus.pairs.push_back(p);
        out.push_back(std::move(dir));
    }
    return out;
}

Corpus read_synthetic(const PipelineConfig& cfg) {
    Corpus synth = ingest_parallel(out_path(cfg, "backtrans/synthetic.src"),
                                   out_path(cfg, "backtrans/synthetic.tgt"),
                                   cfg.backtrans.to_lang, cfg.backtrans.mono_lang);
    for (auto& p : synth.pairs) {
        p.origin = Origin::synthetic;
        if (cfg.backtrans.tag_synthetic) p.src_text = "<syn> " + p.src_text;
    }
    synth.provenance = "synthetic";
    return synth;
}

std::string assembled_dir(bool with_synthetic) {
    return with_synthetic ? "assembled-bt" : "assembled";
}
std::string checkpoint_dir(bool with_synthetic) {
    return with_synthetic ? "checkpoint-bt" : "checkpoint";
}

std::vector<std::string> segment_lines(const MergeTable& mt,
                                       const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    out.reserve(lines.size());
    for (const auto& line : lines) out.push_back(join(segment(mt, line, reserved_token), " "));
    return out;
}

std::vector<std::string> lang_codes(const PipelineConfig& cfg) {
    std::vector<std::string> codes;
    for (const auto& l : cfg.languages) codes.push_back(l.code);
    return codes;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

OutputLock::OutputLock(const std::string& output_dir) {
    fs::create_directories(output_dir);
    path_ = output_dir + "/.lock";
    if (fs::exists(path_))
        fail("ConcurrentRun", "lock file " + path_ +
                                  " exists; another run is using this output directory "
                                  "(delete it if that run is dead)");
    write_file(path_, std::to_string(static_cast<long long>(::getpid())) + "\n");
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// ---------------------------------------------------------------------
//  Config
// ---------------------------------------------------------------------

PipelineConfig PipelineConfig::load(const std::string& path,
                                    const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            fail("ConfigError", "override '" + ov + "' is not key=value");
        std::string key = "/" + ov.substr(0, eq);
        std::replace(key.begin(), key.end(), '.', '/');
        const std::string value = ov.substr(eq + 1);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
            parsed = value;  // plain string
        }
        j[nlohmann::json::json_pointer(key)] = parsed;
    }

    const std::string base = fs::path(path).parent_path().string();
    PipelineConfig cfg;
    try {
        cfg.seed = j.value("seed", 1ULL);
        cfg.output_dir = j.value("output_dir", std::string("out"));
        cfg.dataset_label = j.value("dataset_label", std::string("run"));
        for (const auto& l : j.at("languages")) cfg.languages.emplace_back(l.get<std::string>());
        if (j.contains("lexicons"))
            for (const auto& [lang, files] : j.at("lexicons").items()) {
                std::vector<std::string> paths;
                for (const auto& f : files) paths.push_back(join_path(base, f.get<std::string>()));
                cfg.lexicons[lang] = std::move(paths);
            }
        for (const auto& [lang, size] : j.at("subword_sizes").items())
            cfg.subword_sizes[lang] = size.get<int64_t>();
        cfg.shared_bpe = j.value("shared_bpe", false);
        if (j.contains("clean")) {
            cfg.clean.max_len = j["clean"].value("max_len", cfg.clean.max_len);
            cfg.clean.max_ratio = j["clean"].value("max_ratio", cfg.clean.max_ratio);
        }
        if (j.contains("split")) {
            cfg.split.dev_frac = j["split"].value("dev_frac", cfg.split.dev_frac);
            cfg.split.test_frac = j["split"].value("test_frac", cfg.split.test_frac);
        }

        const auto& mw = j.at("multiway");
        for (const auto& d : mw.at("directions")) {
            DirectionCfg dir;
            dir.src = LangTag(d.at("src").get<std::string>());
            dir.tgt = LangTag(d.at("tgt").get<std::string>());
            const auto& files = d.at("files");
            if (files.size() != 2)
                fail("ConfigError", "multiway direction files must be [src_file, tgt_file]");
            dir.src_file = join_path(base, files[0].get<std::string>());
            dir.tgt_file = join_path(base, files[1].get<std::string>());
            dir.weight = d.value("weight", 1.0);
            cfg.directions.push_back(std::move(dir));
        }
        if (mw.contains("bridge")) {
            const auto& br = mw.at("bridge");
            cfg.bridge.file = join_path(base, br.at("file").get<std::string>());
            const auto& langs = br.at("langs");
            if (langs.size() != 3) fail("ConfigError", "bridge.langs must list 3 languages");
            for (int i = 0; i < 3; ++i)
                cfg.bridge.langs[static_cast<size_t>(i)] =
                    LangTag(langs[static_cast<size_t>(i)].get<std::string>());
            cfg.bridge.weight = br.value("weight", 1.0);
            if (br.contains("directions") && !br.at("directions").is_string()) {
                for (const auto& d : br.at("directions")) {
                    const auto parts = split_char(d.get<std::string>(), '-');
                    if (parts.size() != 2)
                        fail("ConfigError", "bridge direction must look like 'sc-en'");
                    cfg.bridge.directions.emplace_back(LangTag(parts[0]), LangTag(parts[1]));
                }
            } else {
                cfg.bridge.directions = all_six_directions(cfg.bridge.langs);
            }
        }

        const auto& mj = j.at("model");
        cfg.preset_name = mj.at("preset").get<std::string>();
        cfg.model = model::make_config(model::preset_from_name(cfg.preset_name));
        if (mj.contains("overrides")) {
            const auto& ov = mj.at("overrides");
            cfg.model.layers = ov.value("layers", cfg.model.layers);
            cfg.model.embedding_size = ov.value("embedding_size", cfg.model.embedding_size);
            cfg.model.model_size = ov.value("model_size", cfg.model.model_size);
            if (ov.contains("model_size") && !ov.contains("embedding_size"))
                cfg.model.embedding_size = cfg.model.model_size;
            cfg.model.attention_heads = ov.value("attention_heads", cfg.model.attention_heads);
            cfg.model.feed_forward = ov.value("feed_forward", cfg.model.feed_forward);
            cfg.model.dropout = ov.value("dropout", cfg.model.dropout);
            cfg.model.label_smoothing = ov.value("label_smoothing", cfg.model.label_smoothing);
            cfg.model.shared_embeddings = ov.value("shared_embeddings", cfg.model.shared_embeddings);
        }

        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.batch_tokens = t.value("batch_tokens", cfg.train.batch_tokens);
            cfg.train.max_updates = t.value("max_updates", cfg.train.max_updates);
            cfg.train.lr_peak = t.value("lr_peak", cfg.train.lr_peak);
            cfg.train.warmup = t.value("warmup", cfg.train.warmup);
            cfg.train.checkpoint_interval =
                t.value("checkpoint_interval", cfg.train.checkpoint_interval);
            cfg.train.patience = t.value("patience", cfg.train.patience);
            cfg.train.verbose = t.value("verbose", cfg.train.verbose);
        }

        if (j.contains("backtranslation")) {
            const auto& bt = j.at("backtranslation");
            cfg.backtrans.enabled = bt.value("enabled", false);
            if (cfg.backtrans.enabled || bt.contains("mono_file")) {
                cfg.backtrans.mono_file = join_path(base, bt.value("mono_file", std::string()));
                cfg.backtrans.mono_lang = LangTag(bt.at("mono_lang").get<std::string>());
                cfg.backtrans.to_lang = LangTag(bt.at("to_lang").get<std::string>());
                cfg.backtrans.beam = bt.value("beam", 5);
                cfg.backtrans.weight = bt.value("weight", 1.0);
                cfg.backtrans.tag_synthetic = bt.value("tag_synthetic", false);
            }
        }

        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            cfg.eval.beam = e.value("beam", cfg.eval.beam);
            cfg.eval.max_len_factor = e.value("max_len_factor", cfg.eval.max_len_factor);
            cfg.eval.max_test_sentences =
                e.value("max_test_sentences", cfg.eval.max_test_sentences);
        }
    } catch (const nlohmann::json::exception& e) {
        fail("ConfigError", std::string("while reading ") + path + ": " + e.what());
    }

    cfg.canonical_json = j.dump();
    cfg.validate();
    return cfg;
}

void PipelineConfig::validate() const {
    if (languages.empty()) fail("ConfigError", "languages must be nonempty");
    std::set<std::string> seen;
    for (const auto& l : languages)
        if (!seen.insert(l.code).second) fail("ConfigError", "duplicate language " + l.code);
    auto known = [&](const LangTag& l) { return seen.count(l.code) > 0; };

    if (directions.empty()) fail("ConfigError", "multiway.directions must be nonempty");
    for (const auto& d : directions) {
        if (!known(d.src) || !known(d.tgt))
            fail("ConfigError", "direction " + d.name() + " uses an undeclared language");
        if (d.src == d.tgt) fail("ConfigError", "direction " + d.name() + " maps onto itself");
        if (!(d.weight > 0)) fail("ConfigError", "direction " + d.name() + " needs weight > 0");
        if (!fs::exists(d.src_file)) fail("ConfigError", "missing file " + d.src_file);
        if (!fs::exists(d.tgt_file)) fail("ConfigError", "missing file " + d.tgt_file);
    }
    for (const auto& [lang, size] : subword_sizes) {
        if (!seen.count(lang)) fail("ConfigError", "subword size for undeclared language " + lang);
        if (size <= 0) fail("ConfigError", "subword size for " + lang + " must be positive");
    }
    for (const auto& [lang, files] : lexicons) {
        if (!seen.count(lang)) fail("ConfigError", "lexicon for undeclared language " + lang);
        for (const auto& f : files)
            if (!fs::exists(f)) fail("ConfigError", "missing lexicon file " + f);
    }
    if (bridge.enabled()) {
        if (!fs::exists(bridge.file)) fail("ConfigError", "missing bridge file " + bridge.file);
        for (const auto& l : bridge.langs)
            if (!known(l)) fail("ConfigError", "bridge language " + l.code + " is undeclared");
        if (bridge.directions.empty()) fail("ConfigError", "bridge.directions must be nonempty");
    }
    if (backtrans.enabled) {
        if (!fs::exists(backtrans.mono_file))
            fail("ConfigError", "missing monolingual file " + backtrans.mono_file);
        if (!known(backtrans.mono_lang) || !known(backtrans.to_lang))
            fail("ConfigError", "backtranslation languages must be declared");
        if (backtrans.mono_lang == backtrans.to_lang)
            fail("ConfigError", "backtranslation mono_lang equals to_lang");
    }
    model.validate();
    train.validate();
}

// ---------------------------------------------------------------------
//  Stages
// ---------------------------------------------------------------------

void stage_prepare(const PipelineConfig& cfg) {
    Manifest m{"prepare", &cfg, {}};
    for (const auto& d : cfg.directions) {
        Corpus raw = ingest_parallel(d.src_file, d.tgt_file, d.src, d.tgt);
        Corpus clean = clean_and_dedup(raw, static_cast<size_t>(cfg.clean.max_len),
                                       cfg.clean.max_ratio);
        const SplitResult split =
            split_corpus(clean, cfg.split.dev_frac, cfg.split.test_frac, split_seed_for(cfg, d));
        const std::vector<std::pair<std::string, const Corpus*>> parts{
            {"train", &split.train}, {"dev", &split.dev}, {"test", &split.test}};
        for (const auto& [name, corpus] : parts) {
            write_corpus_atomic(*corpus, out_path(cfg, prepared(d, name, "src")),
                                out_path(cfg, prepared(d, name, "tgt")));
            m.add(prepared(d, name, "src"));
            m.add(prepared(d, name, "tgt"));
        }
    }
    m.write();
}

void stage_learn_bpe(const PipelineConfig& cfg) {
    Manifest m{"learn-bpe", &cfg, {}};

    std::vector<std::string> src_text, tgt_text;
    std::set<std::string> src_langs, tgt_langs;
    for (const auto& d : cfg.directions) {
        const Corpus train = read_prepared(cfg, d, "train");
        for (const auto& p : train.pairs) {
            src_text.push_back(p.src_text);
            tgt_text.push_back(p.tgt_text);
        }
        src_langs.insert(d.src.code);
        tgt_langs.insert(d.tgt.code);
    }
    for (const auto& dir : bridge_directions(cfg)) {
        for (const auto& p : dir.corpus.pairs) {
            src_text.push_back(p.src_text);
            tgt_text.push_back(p.tgt_text);
        }
        src_langs.insert(dir.src.code);
        tgt_langs.insert(dir.tgt.code);
    }

    auto budget = [&](const std::set<std::string>& langs) {
        int64_t best = 0;
        for (const auto& l : langs) {
            const auto it = cfg.subword_sizes.find(l);
            if (it != cfg.subword_sizes.end()) best = std::max(best, it->second);
        }
        return best > 0 ? static_cast<size_t>(best) : size_t{1000};
    };
    auto lexicon_for = [&](const std::set<std::string>& langs) -> std::optional<BiasLexicon> {
        std::vector<std::string> files;
        for (const auto& l : langs) {
            const auto it = cfg.lexicons.find(l);
            if (it != cfg.lexicons.end())
                files.insert(files.end(), it->second.begin(), it->second.end());
        }
        if (files.empty()) return std::nullopt;
        return build_bias_lexicon(files);
    };

    MergeTable merges_src, merges_tgt;
    if (cfg.shared_bpe) {
        std::vector<std::string> all_text = src_text;
        all_text.insert(all_text.end(), tgt_text.begin(), tgt_text.end());
        std::set<std::string> all_langs = src_langs;
        all_langs.insert(tgt_langs.begin(), tgt_langs.end());
        const auto lex = lexicon_for(all_langs);
        merges_src = learn_merges(count_words(all_text), lex ? &*lex : nullptr,
                                  budget(all_langs));
        merges_tgt = merges_src;
    } else {
        const auto src_lex = lexicon_for(src_langs);
        merges_src = learn_merges(count_words(src_text), src_lex ? &*src_lex : nullptr,
                                  budget(src_langs));
        const auto tgt_lex = lexicon_for(tgt_langs);
        merges_tgt = learn_merges(count_words(tgt_text), tgt_lex ? &*tgt_lex : nullptr,
                                  budget(tgt_langs));
    }

    atomic_write(out_path(cfg, "bpe/merges.src"), serialize_merges(merges_src));
    atomic_write(out_path(cfg, "bpe/merges.tgt"), serialize_merges(merges_tgt));
    m.add("bpe/merges.src");
    m.add("bpe/merges.tgt");

    atomic_write(out_path(cfg, "bpe/vocab.src.tsv"),
                 serialize_vocab(vocab_from_sentences(merges_src, src_text)));
    atomic_write(out_path(cfg, "bpe/vocab.tgt.tsv"),
                 serialize_vocab(vocab_from_sentences(merges_tgt, tgt_text)));
    m.add("bpe/vocab.src.tsv");
    m.add("bpe/vocab.tgt.tsv");
    m.write();
}

void stage_assemble(const PipelineConfig& cfg, bool with_synthetic) {
    Manifest m{with_synthetic ? "assemble+synthetic" : "assemble", &cfg, {}};

    MultiwaySpec spec;
    Corpus dev;
    for (const auto& d : cfg.directions) {
        MultiwayDirection dir;
        dir.src = d.src;
        dir.tgt = d.tgt;
        dir.weight = d.weight;
        dir.corpus = read_prepared(cfg, d, "train");
        dir.corpus.provenance = d.name();
        spec.directions.push_back(std::move(dir));
        const Corpus ddev = read_prepared(cfg, d, "dev");
        dev.pairs.insert(dev.pairs.end(), ddev.pairs.begin(), ddev.pairs.end());
    }
    for (auto& dir : bridge_directions(cfg)) spec.directions.push_back(std::move(dir));
    if (with_synthetic) {
        MultiwayDirection dir;
        dir.corpus = read_synthetic(cfg);
        dir.src = cfg.backtrans.to_lang;
        dir.tgt = cfg.backtrans.mono_lang;
        dir.weight = cfg.backtrans.weight;
        spec.directions.push_back(std::move(dir));
    }

    const Corpus train =
        assemble_multiway(spec, cfg.languages, derive_seed(cfg.seed, "assemble"));
    for (auto& p : dev.pairs) p = tag_direction(p, cfg.languages);

    const std::string dir = assembled_dir(with_synthetic);
    write_corpus_atomic(train, out_path(cfg, dir + "/train.src"),
                        out_path(cfg, dir + "/train.tgt"));
    write_corpus_atomic(dev, out_path(cfg, dir + "/dev.src"), out_path(cfg, dir + "/dev.tgt"));
    for (const auto& split : {"train", "dev"})
        for (const auto& side : {"src", "tgt"})
            m.add(dir + "/" + std::string(split) + "." + side);
    m.write();
}

void stage_apply_bpe(const PipelineConfig& cfg, bool with_synthetic) {
    Manifest m{with_synthetic ? "apply-bpe+synthetic" : "apply-bpe", &cfg, {}};
    const MergeTable merges_src = read_merges(out_path(cfg, "bpe/merges.src"));
    const MergeTable merges_tgt = read_merges(out_path(cfg, "bpe/merges.tgt"));
    const std::string dir = assembled_dir(with_synthetic);
    for (const auto& split : {"train", "dev"}) {
        const auto src_lines = read_lines(out_path(cfg, dir + "/" + split + ".src"));
        const auto tgt_lines = read_lines(out_path(cfg, dir + "/" + split + ".tgt"));
        atomic_write(out_path(cfg, dir + "/" + split + ".bpe.src"),
                     join(segment_lines(merges_src, src_lines), "\n") +
                         (src_lines.empty() ? "" : "\n"));
        atomic_write(out_path(cfg, dir + "/" + split + ".bpe.tgt"),
                     join(segment_lines(merges_tgt, tgt_lines), "\n") +
                         (tgt_lines.empty() ? "" : "\n"));
        m.add(dir + "/" + std::string(split) + ".bpe.src");
        m.add(dir + "/" + std::string(split) + ".bpe.tgt");
    }
    m.write();
}

void stage_train(const PipelineConfig& cfg, bool with_synthetic) {
    Manifest m{with_synthetic ? "train+synthetic" : "train", &cfg, {}};
    const std::string dir = assembled_dir(with_synthetic);

    auto load_tokens = [&](const std::string& rel) {
        std::vector<std::vector<std::string>> lines;
        for (const auto& line : read_lines(out_path(cfg, rel))) lines.push_back(split_ws(line));
        return lines;
    };
    const auto train_src = load_tokens(dir + "/train.bpe.src");
    const auto train_tgt = load_tokens(dir + "/train.bpe.tgt");
    const auto dev_src = load_tokens(dir + "/dev.bpe.src");
    const auto dev_tgt = load_tokens(dir + "/dev.bpe.tgt");

    model::Vocab src_vocab, tgt_vocab;
    auto all_of = [](std::vector<std::vector<std::string>> a,
                     const std::vector<std::vector<std::string>>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    if (cfg.model.shared_embeddings) {
        const auto joint =
            all_of(all_of(all_of(train_src, train_tgt), dev_src), dev_tgt);
        src_vocab = model::build_vocab(joint, lang_codes(cfg));
        tgt_vocab = src_vocab;
    } else {
        src_vocab = model::build_vocab(all_of(train_src, dev_src), lang_codes(cfg));
        tgt_vocab = model::build_vocab(all_of(train_tgt, dev_tgt), lang_codes(cfg));
    }

    std::vector<model::TokenizedPair> train_pairs, dev_pairs;
    for (size_t i = 0; i < train_src.size(); ++i)
        train_pairs.push_back(model::TokenizedPair{train_src[i], train_tgt[i]});
    for (size_t i = 0; i < dev_src.size(); ++i)
        dev_pairs.push_back(model::TokenizedPair{dev_src[i], dev_tgt[i]});

    model::TrainSpec spec = cfg.train;
    spec.seed = derive_seed(cfg.seed, with_synthetic ? "train-bt" : "train");

    model::Checkpoint ck =
        model::train(cfg.model, spec, train_pairs, dev_pairs, src_vocab, tgt_vocab);
    ck.merges_src = read_merges(out_path(cfg, "bpe/merges.src"));
    ck.merges_tgt = read_merges(out_path(cfg, "bpe/merges.tgt"));

    const std::string ck_dir = out_path(cfg, checkpoint_dir(with_synthetic));
    model::save_checkpoint(ck, ck_dir);
    for (const auto& f :
         {"params.bin", "config.json", "vocab.src", "vocab.tgt", "merges.src", "merges.tgt",
          "meta.json"})
        m.add(checkpoint_dir(with_synthetic) + "/" + f);
    m.write();
}

void stage_backtranslate(const PipelineConfig& cfg) {
    Manifest m{"backtranslate", &cfg, {}};
    if (!cfg.backtrans.enabled) fail("ConfigError", "backtranslation is not enabled");

    const model::Checkpoint ck = model::load_checkpoint(out_path(cfg, checkpoint_dir(false)));
    const MonolingualCorpus mono =
        read_monolingual(cfg.backtrans.mono_file, cfg.backtrans.mono_lang);
    BacktransLog log;
    const Corpus synth = generate_synthetic(ck, mono, cfg.backtrans.to_lang,
                                            cfg.backtrans.beam, &log);

    write_corpus_atomic(synth, out_path(cfg, "backtrans/synthetic.src"),
                        out_path(cfg, "backtrans/synthetic.tgt"));
    std::string prov;
    for (size_t i = 0; i < synth.pairs.size(); ++i)
        prov += std::to_string(i + 1) + "\t" + origin_name(synth.pairs[i].origin) + "\n";
    atomic_write(out_path(cfg, "backtrans/provenance.tsv"), prov);
    std::string fail_log;
    for (const auto& f : log.failures) fail_log += f + "\n";
    atomic_write(out_path(cfg, "backtrans/failures.log"), fail_log);

    std::cerr << "backtranslate: " << synth.pairs.size() << "/" << log.attempted
              << " sentences kept (" << log.failed << " failed)\n";
    m.add("backtrans/synthetic.src");
    m.add("backtrans/synthetic.tgt");
    m.add("backtrans/provenance.tsv");
    m.write();
}

std::string final_checkpoint_dir(const PipelineConfig& cfg) {
    return out_path(cfg, checkpoint_dir(cfg.backtrans.enabled));
}

std::string translate_line(const model::Checkpoint& ck, const model::Translator& translator,
                           const std::string& raw_line, const LangTag& to, int beam,
                           double max_len_factor) {
    std::vector<std::string> tokens{direction_token(to)};
    for (const auto& t : segment(ck.merges_src, raw_line, reserved_token)) tokens.push_back(t);
    return desegment(translator.tokens(tokens, beam, max_len_factor));
}

void stage_evaluate(const PipelineConfig& cfg) {
    Manifest m{"evaluate", &cfg, {}};
    const model::Checkpoint ck = model::load_checkpoint(final_checkpoint_dir(cfg));
    const model::Translator translator(ck);

    ExperimentRow row;
    row.dataset = cfg.dataset_label;
    for (const auto& [lang, size] : cfg.subword_sizes) row.subwords.emplace_back(lang, size);

    // Line/token accounting over the unique training data (each physical
    // file counted once even when two directions share it).
    int64_t lines = 0;
    std::map<std::string, int64_t> tokens;
    std::set<std::string> counted;
    for (const auto& d : cfg.directions) {
        const Corpus train = read_prepared(cfg, d, "train");
        const std::string key = std::min(d.src_file, d.tgt_file) + "|" +
                                std::max(d.src_file, d.tgt_file);
        if (!counted.insert(key).second) continue;
        lines += static_cast<int64_t>(train.size());
        for (const auto& p : train.pairs) {
            tokens[d.src.code] += static_cast<int64_t>(split_ws(p.src_text).size());
            tokens[d.tgt.code] += static_cast<int64_t>(split_ws(p.tgt_text).size());
        }
    }
    const auto rows = bridge_rows(cfg);
    if (!rows.empty()) {
        lines += static_cast<int64_t>(rows.size());
        for (const auto& r : rows) {
            tokens[cfg.bridge.langs[0].code] += static_cast<int64_t>(split_ws(r.sc).size());
            tokens[cfg.bridge.langs[1].code] += static_cast<int64_t>(split_ws(r.en).size());
            tokens[cfg.bridge.langs[2].code] += static_cast<int64_t>(split_ws(r.it).size());
        }
    }
    if (cfg.backtrans.enabled && fs::exists(out_path(cfg, "backtrans/synthetic.src"))) {
        const Corpus synth = read_synthetic(cfg);
        lines += static_cast<int64_t>(synth.size());
        for (const auto& p : synth.pairs)
            tokens[p.src_lang.code] += static_cast<int64_t>(split_ws(p.src_text).size());
    }
    row.lines = lines;
    for (const auto& l : cfg.languages)
        if (tokens.count(l.code)) row.tokens.emplace_back(l.code, tokens[l.code]);

    for (const auto& d : cfg.directions) {
        const Corpus test = read_prepared(cfg, d, "test");
        if (test.empty()) continue;
        std::vector<std::string> hyps, refs;
        const size_t cap = cfg.eval.max_test_sentences > 0
                               ? std::min<size_t>(test.size(),
                                                  static_cast<size_t>(cfg.eval.max_test_sentences))
                               : test.size();
        hyps.resize(cap);
        refs.reserve(cap);
        for (size_t i = 0; i < cap; ++i) refs.push_back(test.pairs[i].tgt_text);
        lores::parallel_shards(static_cast<int>(cap), lores::worker_threads(),
                               [&](int, int begin, int end) {
                                   for (int i = begin; i < end; ++i) {
                                       try {
                                           hyps[static_cast<size_t>(i)] = translate_line(
                                               ck, translator,
                                               test.pairs[static_cast<size_t>(i)].src_text, d.tgt,
                                               cfg.eval.beam, cfg.eval.max_len_factor);
                                       } catch (const Error&) {
                                           hyps[static_cast<size_t>(i)].clear();
                                       }
                                   }
                               });
        std::string hyp_text, ref_text;
        for (size_t i = 0; i < cap; ++i) {
            hyp_text += hyps[i] + "\n";
            ref_text += refs[i] + "\n";
        }
        atomic_write(out_path(cfg, "translations/" + d.name() + ".hyp"), hyp_text);
        atomic_write(out_path(cfg, "translations/" + d.name() + ".ref"), ref_text);
        m.add("translations/" + d.name() + ".hyp");
        m.add("translations/" + d.name() + ".ref");

        const BleuReport rep = corpus_bleu(hyps, refs);
        atomic_write(out_path(cfg, "scores/" + d.name() + ".txt"), rep.record() + "\n");
        m.add("scores/" + d.name() + ".txt");
        row.bleu.emplace_back(d.name(), rep.score);
        std::cout << d.name() << " " << rep.record() << "\n";
    }

    atomic_write(out_path(cfg, "experiment_row.json"), experiment_row_to_json(row));
    atomic_write(out_path(cfg, "report.tsv"), experiment_report({row}, ReportFormat::tsv));
    atomic_write(out_path(cfg, "report.md"), experiment_report({row}, ReportFormat::markdown));
    m.add("experiment_row.json");
    m.add("report.tsv");
    m.add("report.md");
    m.write();
}

void run_pipeline(const PipelineConfig& cfg) {
    stage_prepare(cfg);
    stage_learn_bpe(cfg);
    stage_assemble(cfg, false);
    stage_apply_bpe(cfg, false);
    stage_train(cfg, false);
    if (cfg.backtrans.enabled) {
        stage_backtranslate(cfg);
        stage_assemble(cfg, true);
        stage_apply_bpe(cfg, true);
        stage_train(cfg, true);
    }
    stage_evaluate(cfg);
}

}  // namespace lores::pipeline
