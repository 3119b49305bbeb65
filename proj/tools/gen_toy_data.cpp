// Regenerates the bundled toy dataset (data/toy). The committed files are
// outputs of this tool with the default seed; rerun it only when the
// generator changes.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lores/corpus.hpp"
#include "lores/eval.hpp"
#include "lores/synthlang.hpp"
#include "lores/text.hpp"

using namespace lores;

namespace {

void write_rows_parallel(const Corpus& c, const std::string& src_path,
                         const std::string& tgt_path) {
    write_parallel(c, src_path, tgt_path);
}

std::string toy_config(bool backtranslation) {
    // Keys mirror PipelineConfig; paths are relative to this config file.
    std::string mw;
    if (backtranslation) {
        mw = R"({
    "directions": [
      {"src": "sc", "tgt": "en", "files": ["parallel.sc", "parallel.en"], "weight": 1.0},
      {"src": "en", "tgt": "sc", "files": ["parallel.en", "parallel.sc"], "weight": 1.0}
    ]
  })";
    } else {
        mw = R"({
    "directions": [
      {"src": "sc", "tgt": "en", "files": ["parallel.sc", "parallel.en"], "weight": 1.0},
      {"src": "en", "tgt": "sc", "files": ["parallel.en", "parallel.sc"], "weight": 1.0},
      {"src": "it", "tgt": "en", "files": ["books.it", "books.en"], "weight": 1.0},
      {"src": "en", "tgt": "it", "files": ["books.en", "books.it"], "weight": 1.0}
    ],
    "bridge": {"file": "bridge.tsv", "langs": ["sc", "en", "it"], "weight": 1.0}
  })";
    }
    const std::string label = backtranslation ? "toy-back" : "toy-bridge";
    const std::string out_dir = backtranslation ? "out/toy-back" : "out/toy";
    std::string bt;
    if (backtranslation) {
        bt = R"(
  "backtranslation": {
    "enabled": true, "mono_file": "mono.sc.txt", "mono_lang": "sc", "to_lang": "en",
    "beam": 2, "weight": 1.0, "tag_synthetic": false
  },)";
    }
    return std::string("{\n") +
           "  \"seed\": 7,\n"
           "  \"output_dir\": \"" + out_dir + "\",\n"
           "  \"dataset_label\": \"" + label + "\",\n"
           "  \"languages\": [\"sc\", \"en\", \"it\"],\n"
           "  \"lexicons\": {\"sc\": [\"lexicon.sc.txt\"]},\n"
           "  \"subword_sizes\": {\"sc\": 140, \"en\": 140, \"it\": 140},\n"
           "  \"shared_bpe\": false,\n"
           "  \"clean\": {\"max_len\": 60, \"max_ratio\": 9.0},\n"
           "  \"split\": {\"dev_frac\": 0.1, \"test_frac\": 0.1},\n"
           "  \"multiway\": " + mw + ",\n"
           "  \"model\": {\"preset\": \"our_models\", \"overrides\": {\n"
           "    \"layers\": 2, \"model_size\": 48, \"attention_heads\": 4,\n"
           "    \"feed_forward\": 192, \"dropout\": 0.1}},\n"
           "  \"train\": {\"batch_tokens\": 700, \"max_updates\": 250, \"lr_peak\": 0.003,\n"
           "    \"warmup\": 50, \"checkpoint_interval\": 50, \"patience\": 10},\n" +
           bt +
           "\n  \"eval\": {\"beam\": 2, \"max_len_factor\": 2.0, \"max_test_sentences\": 40}\n"
           "}\n";
}

ExperimentRow fixture_row(const std::string& label, int64_t sw, int64_t lines, int64_t sc_tok,
                          int64_t en_tok, int64_t it_tok, double en_sc, double sc_en,
                          double it_sc, double sc_it) {
    ExperimentRow row;
    row.dataset = label;
    row.subwords = {{"sc", sw}, {"en", sw}};
    row.lines = lines;
    row.tokens = {{"sc", sc_tok}, {"en", en_tok}};
    if (it_tok > 0) {
        row.subwords.emplace_back("it", sw);
        row.tokens.emplace_back("it", it_tok);
    }
    row.bleu = {{"en-sc", en_sc}, {"sc-en", sc_en}};
    if (it_sc > 0) {
        row.bleu.emplace_back("it-sc", it_sc);
        row.bleu.emplace_back("sc-it", sc_it);
    }
    return row;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regenerate the bundled toy dataset"};
    std::string out = "data/toy";
    app.add_option("--out", out, "destination directory");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(out);
    std::filesystem::create_directories(out + "/experiments");

    synth::SynthSpec spec;
    spec.n_stems = 40;
    spec.n_irregular = 6;
    spec.endings = {"u", "", "o"};
    spec.langs = {LangTag("sc"), LangTag("en"), LangTag("it")};
    spec.min_len = 2;
    spec.max_len = 7;
    spec.seed = 20210927;

    const synth::SynthLexicon lex = synth::make_lexicon(spec);

    write_rows_parallel(synth::make_parallel(spec, lex, 600, 0, 1, 1),
                        out + "/parallel.sc", out + "/parallel.en");
    write_rows_parallel(synth::make_parallel(spec, lex, 500, 2, 1, 2),
                        out + "/books.it", out + "/books.en");
    write_trilingual(synth::make_rows(spec, lex, 120, 3), out + "/bridge.tsv");

    // Monolingual Sicilian held out of the parallel sets.
    const auto mono_rows = synth::make_rows(spec, lex, 60, 4);
    std::string mono;
    for (const auto& r : mono_rows) mono += r.sc + "\n";
    write_file(out + "/mono.sc.txt", mono);

    // Inflection-table lexicon: every regular stem with the full set of
    // present-tense desinences, most of which never occur in the corpus.
    const std::vector<std::string> desinences{"u", "i", "a", "amu", "ati", "anu"};
    std::string lexicon;
    for (size_t i = 0; i < lex.words.size(); ++i) {
        if (lex.irregular[i]) continue;
        const std::string& sc_form = lex.words[i][0];
        const std::string stem = sc_form.substr(0, sc_form.size() - 1);  // strip "u"
        for (const auto& d : desinences) lexicon += stem + d + "\n";
    }
    write_file(out + "/lexicon.sc.txt", lexicon);

    write_file(out + "/config.json", toy_config(false));
    write_file(out + "/config-back.json", toy_config(true));

    // Sample experiment rows in the shape the report renders (values are
    // illustrative toy results, not measurements).
    write_file(out + "/experiments/row-bilingual.json",
               experiment_row_to_json(
                   fixture_row("toy-20", 140, 486, 2101, 2087, 0, 62.1, 64.8, 0, 0)));
    write_file(out + "/experiments/row-multiway.json",
               experiment_row_to_json(
                   fixture_row("toy-books", 140, 891, 2101, 3890, 1853, 58.4, 61.2, 0, 0)));
    write_file(out + "/experiments/row-bridge.json",
               experiment_row_to_json(fixture_row("toy-bridge", 140, 1011, 2560, 4320, 2310,
                                                  60.0, 62.5, 55.3, 54.1)));

    std::cout << "wrote toy dataset under " << out << "\n";
    return 0;
}
